//! Named experiment configs, one per reproduced figure panel.

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    /// What the preset changes relative to its base system.
    pub delta: &'static str,
    pub budget_seconds: u64,
    body: &'static str,
}

impl Preset {
    /// Full TOML text; the output directory defaults to `runs/<name>`.
    pub fn toml(&self) -> String {
        format!("output = \"runs/{}\"\n{}", self.name, self.body.trim_start())
    }

    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(&self.toml())
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig-bifdiagsdde-tau",
        figure: "BifDiagsDDE (delay axis)",
        delta: "two-population system, lambda = 0.1, sweep tau over [0.1, 6], unstable root counts",
        budget_seconds: 240,
        body: r#"
kind = "finite-dde"
[sigmoid]
gain = 1.0
[sweep]
parameter = "tau"
from = 0.1
to = 6.0
steps = 30
[analysis]
equilibria = true
roots = true
[solver]
t_end = 50.0
dt = 0.002
[finite]
j = [[15.0, -12.0], [16.0, -5.0]]
input = [0.0, -3.0]
noise = 0.1
"#,
    },
    Preset {
        name: "fig-bifdiagsdde-noise",
        figure: "BifDiagsDDE (noise axis)",
        delta: "two-population system, tau = 1, sweep lambda over [0.1, 4], unstable root counts",
        budget_seconds: 240,
        body: r#"
kind = "finite-dde"
[sigmoid]
gain = 1.0
[sweep]
parameter = "noise"
from = 0.1
to = 4.0
steps = 40
[analysis]
equilibria = true
roots = true
[solver]
t_end = 50.0
[finite]
j = [[15.0, -12.0], [16.0, -5.0]]
input = [0.0, -3.0]
noise = 0.1
tau = 1.0
"#,
    },
    Preset {
        name: "fig-behaves15",
        figure: "Behaves15",
        delta: "two-population network, lambda = 1.5, tau = 0.5, N = 10^4, 100 traced neurons",
        budget_seconds: 180,
        body: r#"
kind = "network-validate"
seed = 15
[sigmoid]
gain = 1.0
[solver]
t_end = 40.0
dt = 0.01
[network]
sizes = [10000]
trace = 100
sample_times = [10.0, 20.0, 30.0, 40.0]
[finite]
j = [[15.0, -12.0], [16.0, -5.0]]
input = [0.0, -3.0]
noise = 1.5
tau = 0.5
"#,
    },
    Preset {
        name: "hopf-cascade-symmetric",
        figure: "Analytic (Hopf curves)",
        delta: "rotation pair, g = 3, branches m = 0..5",
        budget_seconds: 10,
        body: r#"
kind = "hopf-curves"
[sigmoid]
gain = 3.0
[spectral]
m_min = 0
m_max = 5
n_lambda = 200
"#,
    },
    Preset {
        name: "fig-analytic-below-threshold",
        figure: "Analytic (trajectory below the noise threshold)",
        delta: "rotation pair, g = 3, lambda = 0.3, tau = 3",
        budget_seconds: 10,
        body: r#"
kind = "finite-dde"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
[finite]
j = [[1.0, -1.0], [1.0, 1.0]]
input = [0.0, -1.0]
noise = 0.3
tau = 3.0
init_mu = [0.1, 0.0]
"#,
    },
    Preset {
        name: "fig-analytic-above-threshold",
        figure: "Analytic (trajectory above the noise threshold)",
        delta: "rotation pair, g = 3, lambda = 0.7, tau = 3",
        budget_seconds: 10,
        body: r#"
kind = "finite-dde"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
[finite]
j = [[1.0, -1.0], [1.0, 1.0]]
input = [0.0, -1.0]
noise = 0.7
tau = 3.0
init_mu = [0.1, 0.0]
"#,
    },
    Preset {
        name: "fig-nonconstantmode",
        figure: "NonConstantMode (k = 1)",
        delta: "one layer, s = 0.05, w = 1, g = 3, Lambda = 0.1, first box initial condition",
        budget_seconds: 60,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.05
n = 512
record_every = 20
[field]
widths = [0.05]
w = [[1.0]]
noise = 0.1
input = -0.9999546000702375
kernel_norm = "per-width"
init = { mu = [{ kind = "ic1" }], v = [0.005] }
"#,
    },
    Preset {
        name: "fig-nonconstantmode-k2",
        figure: "NonConstantMode (k = 2)",
        delta: "as fig-nonconstantmode with the second box initial condition",
        budget_seconds: 60,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.05
n = 512
record_every = 20
[field]
widths = [0.05]
w = [[1.0]]
noise = 0.1
input = -0.9999546000702375
kernel_norm = "per-width"
init = { mu = [{ kind = "ic2" }], v = [0.005] }
"#,
    },
    Preset {
        name: "fig-onelayer-dispersion",
        figure: "OneLayer (dispersion)",
        delta: "one layer of fig-nonconstantmode, growth rates for |k| <= 16 across Lambda",
        budget_seconds: 30,
        body: r#"
kind = "dispersion"
[sigmoid]
gain = 3.0
[spectral]
n_modes = 16
convention = "circular"
[sweep]
parameter = "noise"
from = 0.1
to = 2.0
steps = 20
[field]
widths = [0.05]
w = [[1.0]]
noise = 0.1
input = -0.9999546000702375
kernel_norm = "per-width"
"#,
    },
    Preset {
        name: "fig-onelayer-turing-hopf",
        figure: "OneLayer (Turing-Hopf delays)",
        delta: "one layer, s = 0.02, w = 1, g = 400, v0 = 0, modes k = 1, 2",
        budget_seconds: 30,
        body: r#"
kind = "turing-hopf"
[sigmoid]
gain = 400.0
[spectral]
k = [1, 2]
m_min = 0
m_max = 4
[field]
widths = [0.02]
w = [[1.0]]
noise = 0.0
input = 0.0
kernel_norm = "per-width"
v0 = 0.0
"#,
    },
    Preset {
        name: "fig-bifdiagspacesynchro",
        figure: "BifDiagSpaceSynchro",
        delta: "two-layer synchronized system, sigma = 0.1, g = 3, sweep Lambda over [1, 3], regime classification",
        budget_seconds: 300,
        body: r#"
kind = "synchronized"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.01
[sweep]
parameter = "noise"
from = 1.0
to = 3.0
steps = 41
[analysis]
regimes = true
[field]
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 1.0
input = [0.0, -3.0]
kernel_norm = "unit-mass"
"#,
    },
    Preset {
        name: "fig-turing-period1",
        figure: "turingPeriod1",
        delta: "two-layer periodic field, Lambda = 0.3, central bump in layer 1",
        budget_seconds: 120,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.01
n = 512
record_every = 20
[field]
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 0.3
input = [0.0, -3.0]
kernel_norm = "unit-mass"
init = { mu = [{ kind = "boxes", boxes = [[0.4875, 0.5125]], value = 5.0 }, { kind = "constant", value = 0.0 }], v = [0.045, 0.045] }
"#,
    },
    Preset {
        name: "fig-turing-period2",
        figure: "turingPeriod2",
        delta: "as fig-turing-period1 with Lambda = 0.6",
        budget_seconds: 120,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.01
n = 512
record_every = 20
[field]
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 0.6
input = [0.0, -3.0]
kernel_norm = "unit-mass"
init = { mu = [{ kind = "boxes", boxes = [[0.4875, 0.5125]], value = 5.0 }, { kind = "constant", value = 0.0 }], v = [0.18, 0.18] }
"#,
    },
    Preset {
        name: "fig-turing-sigma",
        figure: "turingSigma",
        delta: "as fig-turing-period1 with sigma = 0.5, Lambda = 0.5",
        budget_seconds: 120,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 200.0
dt = 0.01
n = 512
record_every = 20
[field]
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.5, 0.5], [0.5, 0.5]]
noise = 0.5
input = [0.0, -3.0]
kernel_norm = "unit-mass"
init = { mu = [{ kind = "boxes", boxes = [[0.4875, 0.5125]], value = 5.0 }, { kind = "constant", value = 0.0 }], v = [0.125, 0.125] }
"#,
    },
    Preset {
        name: "fig-anatom1",
        figure: "Anatom1",
        delta: "two-layer periodic field with widths 0.05 / 0.0125 and transport speed 1, Lambda = 0.3",
        budget_seconds: 180,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 50.0
dt = 0.01
n = 400
record_every = 20
[field]
widths = [0.05, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 0.3
input = [0.0, -3.0]
kernel_norm = "unit-mass"
delay = { speed = 1.0, synaptic = 0.0 }
init = { mu = [{ kind = "boxes", boxes = [[0.4875, 0.5125]], value = 5.0 }, { kind = "constant", value = 0.0 }], v = [0.045, 0.045] }
"#,
    },
    Preset {
        name: "fig-turing-reflected",
        figure: "turingReflected",
        delta: "two-layer field on [0, 1] with reflective boundary, Lambda = 0.6, bump at the left edge",
        budget_seconds: 180,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 400.0
dt = 0.01
n = 512
record_every = 50
[field]
boundary = "reflective"
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 0.6
input = [0.0, -3.0]
kernel_norm = "unit-mass"
init = { mu = [{ kind = "boxes", boxes = [[0.0, 0.025]], value = 5.0 }, { kind = "constant", value = 0.0 }], v = [0.18, 0.18] }
"#,
    },
    Preset {
        name: "appendixB-zero-bc",
        figure: "turingZero",
        delta: "two-layer field on [0, 1] with zero boundary, Lambda = 0.1, homogeneous start",
        budget_seconds: 60,
        body: r#"
kind = "field"
[sigmoid]
gain = 3.0
[solver]
t_end = 50.0
dt = 0.01
n = 512
record_every = 20
[field]
boundary = "zero"
widths = [0.02, 0.0125]
w = [[15.0, -12.0], [16.0, -5.0]]
sigma = [[0.1, 0.1], [0.1, 0.1]]
noise = 0.1
input = [0.0, -3.0]
kernel_norm = "unit-mass"
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}


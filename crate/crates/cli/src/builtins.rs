//! Named scenarios shipped with the binary, stored as ordinary config text.

pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub config: &'static str,
}

pub const BUILTINS: [Builtin; 6] = [
    Builtin {
        name: "ou-relax",
        description: "OU relaxation from N(1,2) towards N(0,1), no control",
        config: r#"[scenario]
name = "ou-relax"
kind = "fp-run"

[model]
hamiltonian = "quadratic"
coefficients = [[1.0]]
kt = 1.0
sigma2 = 2.0

[initial]
mean = [1.0]
variance = 2.0

[numerics]
grid = { lo = -8.0, hi = 8.0, cells = 512 }
dt = 1e-3
t1 = 2.0
record_every = 10
"#,
    },
    Builtin {
        name: "ou-modulated",
        description: "OU relaxation under log-ratio feedback with gain 1",
        config: r#"[scenario]
name = "ou-modulated"
kind = "control-run"

[model]
hamiltonian = "quadratic"
coefficients = [[1.0]]
kt = 1.0
sigma2 = 2.0

[initial]
mean = [1.0]
variance = 2.0

[control]
alpha = 1.0
mode = "modulated"

[numerics]
grid = { lo = -8.0, hi = 8.0, cells = 512 }
dt = 1e-3
t1 = 2.0
record_every = 10
"#,
    },
    Builtin {
        name: "polymer-cooling",
        description: "two tethered blocks under velocity feedback, kinetic temperature per gain",
        config: r#"[scenario]
name = "polymer-cooling"
kind = "sde-run"

[polymer]
masses = [1.0, 1.0]
stiffness = 1.0
gamma = 1.0
alpha_c = [0.0, 0.5, 1.0, 2.0]
kt = 1.0
window = [10.0, 30.0]

[numerics]
n = 2000
dt = 0.01
t1 = 30.0
record_every = 10
seed = 7
"#,
    },
    Builtin {
        name: "qubit-qrec",
        description: "closed qubit: divergence between two states under H and H + dH",
        config: r#"[scenario]
name = "qubit-qrec"
kind = "quantum-run"

[quantum]
hamiltonian = [[0.5, 0.0], [0.0, -0.5]]
perturbation = [[0.0, 0.3], [0.3, 0.0]]
initial_bloch = [0.6, 0.0, 0.6]
tilde_bloch = [0.0, 0.2, 0.5]

[numerics]
dt = 0.01
t1 = 5.0
"#,
    },
    Builtin {
        name: "qubit-lindblad",
        description: "depolarizing qubit relaxing to I/2, dissipative production rate",
        config: r#"[scenario]
name = "qubit-lindblad"
kind = "quantum-run"

[quantum]
hamiltonian = [[0.5, 0.0], [0.0, -0.5]]
initial_bloch = [0.3, 0.4, 0.8]
channel = "depolarizing"
gamma = 0.5

[numerics]
dt = 1e-3
t1 = 3.0
record_every = 10
"#,
    },
    Builtin {
        name: "paths-osmotic",
        description: "stationary OU paths: drifts, osmotic residual, finite energy, weak continuity",
        config: r#"[scenario]
name = "paths-osmotic"
kind = "paths-run"

[model]
hamiltonian = "quadratic"
coefficients = [[1.0]]
kt = 1.0
sigma2 = 2.0

[initial]
mean = [0.0]
variance = 1.0

[numerics]
grid = { lo = -4.0, hi = 4.0, cells = 32 }
n = 100000
dt = 1e-3
t1 = 1.0
record_every = 10
seed = 2024

[paths]
drift_grid = { lo = -4.0, hi = 4.0, cells = 16 }
pooled = true
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn all_parse_and_name_themselves() {
        for b in &BUILTINS {
            let cfg = ScenarioConfig::parse(b.config).unwrap();
            assert_eq!(cfg.scenario.name.as_deref(), Some(b.name));
            assert!(cfg.scenario.kind.is_some());
        }
    }
}

//! Small two-block scenario shared by the integration tests.

#![allow(dead_code)]

use kvcontact::scenario::{parse_scenario, Scenario};

/// Block A pressed onto block B along y = 10 by a displacement of its top
/// face; B is clamped at the bottom.
pub fn blocks_toml(mu: f64, chi: f64, push: [f64; 2], steps: usize) -> String {
    let t_end = 1e-3 * steps as f64;
    format!(
        r#"name = "blocks"
chi = {chi:?}

[contact]
mu = {mu:?}
k_g = 4e5

[[body]]
young_modulus = 4e3
poisson_ratio = 0.35
vertices = [[0.0, 10.0], [10.0, 10.0], [10.0, 14.0], [0.0, 14.0]]
edges = [
  {{ tag = "C", divisions = 6 }},
  {{ tag = "N", divisions = 2 }},
  {{ tag = "D", divisions = 3 }},
  {{ tag = "N", divisions = 2 }},
]

[[body]]
young_modulus = 1.2e4
poisson_ratio = 0.3
vertices = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]
edges = [
  {{ tag = "D", divisions = 3 }},
  {{ tag = "N", divisions = 3 }},
  {{ tag = "C", divisions = 6 }},
  {{ tag = "N", divisions = 3 }},
]

[[load]]
body = "A"
kind = "displacement"
edges = [2]
value = [{px:?}, {py:?}]
times = [0.0, {t_end:?}]
factors = [0.0, 1.0]

[solver]
t_end = {t_end:?}
tau = 1e-3
max_iterations = 100000
"#,
        px = push[0],
        py = push[1],
    )
}

pub fn blocks(mu: f64, chi: f64, push: [f64; 2], steps: usize) -> Scenario {
    parse_scenario(&blocks_toml(mu, chi, push, steps)).unwrap()
}

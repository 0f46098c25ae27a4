//! Experiment configuration: one flat record that pins down a run of any
//! command completely, validates itself in one pass, and round-trips
//! through the `[config]` section of a run manifest so that a finished
//! run can be reproduced from its own output directory.

use std::path::PathBuf;

use crate::calc::Defect;
use crate::potential::{Ball, CompactSpec};
use crate::table::Manifest;
use crate::{QpotError, Result};

/// Names of the run subcommands, in the order the documentation lists them.
pub const COMMANDS: [&str; 6] = [
    "identities",
    "ma-density",
    "extremal",
    "capacity",
    "decay",
    "verify-all",
];

/// Named test functions for the density command.
pub const DENSITY_FUNCTIONS: [&str; 3] = ["normsq", "coord0-square", "zero"];

/// Everything a run needs, with defaults suitable for quick interactive
/// use. Each command reads the subset of fields it cares about; all
/// fields are validated together so one pass reports every problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Which run subcommand this configures.
    pub command: String,
    /// Quaternionic dimension for symbolic work. The identity check
    /// exercises every dimension from 1 up to this value.
    pub n: usize,
    /// Lattice cells per axis for grid work. Must be odd so the lattice
    /// has a cell at the domain center.
    pub resolution: usize,
    /// Radius of the domain ball. The sampling box circumscribes it.
    pub domain_radius: f64,
    /// Compact set specs: `ball:R`, `ball:R@c0,c1,c2,c3`,
    /// `point:c0,c1,c2,c3`, or the single spec `empty`. Several specs
    /// mean the union.
    pub sets: Vec<String>,
    /// Seed for every randomized check in the run.
    pub seed: u64,
    /// Random instances per symbolic check.
    pub count: usize,
    /// Randomized function pairs for the comparison and smoothing checks.
    pub pairs: usize,
    /// Obstacle solver tolerance (largest pointwise update per sweep).
    pub tolerance: f64,
    /// Named test function for the density command.
    pub function: String,
    /// Deliberate operator-table defect for the identity check: `none`,
    /// or a defect id. A run with a defect must fail; it demonstrates the
    /// checks have teeth.
    pub inject: String,
    /// Sublevel thresholds for the decay command, strictly increasing.
    pub thresholds: Vec<f64>,
    /// Shrinking neighborhood schedule for the decay command, strictly
    /// decreasing.
    pub radii: Vec<f64>,
    /// Depth c of the model pole -c / |q - a|^2 in the sublevel study.
    pub pole_depth: f64,
    /// Lattice for the capacity axiom checks inside verify-all. Dyadic
    /// spacings (9, 17, 33) keep set membership exact on cell boundaries.
    pub axiom_resolution: usize,
    /// Lattice for the convergence checks inside verify-all.
    pub convergence_resolution: usize,
    /// Directory the run writes tables and its manifest into.
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for a command. Callers then override from flags.
    pub fn new(command: &str) -> Self {
        ExperimentConfig {
            command: command.to_string(),
            n: 2,
            resolution: 21,
            domain_radius: 1.0,
            sets: vec!["ball:0.5".to_string()],
            seed: 7,
            count: 40,
            pairs: 20,
            tolerance: 1e-8,
            function: "normsq".to_string(),
            inject: "none".to_string(),
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            radii: vec![0.4, 0.2, 0.1, 0.05],
            pole_depth: 0.04,
            axiom_resolution: 17,
            convergence_resolution: 41,
            output_dir: PathBuf::from("qpot-out"),
        }
    }

    /// Check every field and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !COMMANDS.contains(&self.command.as_str()) {
            problems.push(format!(
                "command: unknown id {:?} (known: {})",
                self.command,
                COMMANDS.join(", ")
            ));
        }
        if self.n == 0 || self.n > 4 {
            problems.push(format!(
                "n: dimension must be between 1 and 4, got {}",
                self.n
            ));
        }
        for (label, res) in [
            ("resolution", self.resolution),
            ("axiom_resolution", self.axiom_resolution),
            ("convergence_resolution", self.convergence_resolution),
        ] {
            if res < 5 || res % 2 == 0 {
                problems.push(format!(
                    "{label}: lattice needs an odd cell count of at least 5, got {res}"
                ));
            }
        }
        if !(self.domain_radius.is_finite() && self.domain_radius > 0.0) {
            problems.push(format!(
                "domain_radius: must be a positive finite number, got {}",
                self.domain_radius
            ));
        }
        match parse_sets(&self.sets) {
            Ok(balls) => {
                for (spec, ball) in self.sets.iter().zip(balls.iter().flatten()) {
                    let dist: f64 = ball
                        .center
                        .iter()
                        .map(|c| c * c)
                        .sum::<f64>()
                        .sqrt();
                    if dist + ball.radius > self.domain_radius * (1.0 + 1e-12) + 1e-15 {
                        problems.push(format!(
                            "sets: {spec} does not fit inside the domain ball of radius {}",
                            self.domain_radius
                        ));
                    }
                }
            }
            Err(msgs) => problems.extend(msgs.into_iter().map(|m| format!("sets: {m}"))),
        }
        if self.count == 0 || self.count > 100_000 {
            problems.push(format!(
                "count: must be between 1 and 100000, got {}",
                self.count
            ));
        }
        if self.pairs == 0 || self.pairs > 1_000 {
            problems.push(format!(
                "pairs: must be between 1 and 1000, got {}",
                self.pairs
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            problems.push(format!(
                "tolerance: must lie in (0, 0.01], got {}",
                self.tolerance
            ));
        }
        if !DENSITY_FUNCTIONS.contains(&self.function.as_str()) {
            problems.push(format!(
                "function: unknown name {:?} (known: {})",
                self.function,
                DENSITY_FUNCTIONS.join(", ")
            ));
        }
        if self.inject != "none" && self.inject.parse::<Defect>().is_err() {
            problems.push(format!(
                "inject: unknown defect {:?} (known: none, {})",
                self.inject,
                Defect::ALL.map(|d| d.id()).join(", ")
            ));
        }
        if self.thresholds.is_empty() {
            problems.push("thresholds: need at least one value".to_string());
        }
        if self
            .thresholds
            .iter()
            .any(|m| !(m.is_finite() && *m > 0.0))
        {
            problems.push(format!(
                "thresholds: entries must be positive and finite, got {:?}",
                self.thresholds
            ));
        } else if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            problems.push(format!(
                "thresholds: must increase strictly, got {:?}",
                self.thresholds
            ));
        }
        if self.radii.is_empty() {
            problems.push("radii: need at least one value".to_string());
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            problems.push(format!(
                "radii: entries must be positive and finite, got {:?}",
                self.radii
            ));
        } else {
            if self.radii.windows(2).any(|w| w[1] >= w[0]) {
                problems.push(format!(
                    "radii: must decrease strictly, got {:?}",
                    self.radii
                ));
            }
            if self
                .radii
                .iter()
                .any(|r| *r >= self.domain_radius && self.domain_radius > 0.0)
            {
                problems.push(format!(
                    "radii: entries must stay below the domain radius {}, got {:?}",
                    self.domain_radius, self.radii
                ));
            }
        }
        if !(self.pole_depth.is_finite() && self.pole_depth > 0.0) {
            problems.push(format!(
                "pole_depth: must be a positive finite number, got {}",
                self.pole_depth
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            problems.push("output_dir: must not be empty".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(QpotError::Config(problems))
        }
    }

    /// The defect the `inject` field names, if any.
    pub fn injected_defect(&self) -> Result<Option<Defect>> {
        if self.inject == "none" {
            Ok(None)
        } else {
            Ok(Some(self.inject.parse()?))
        }
    }

    /// The compact set the `sets` specs describe, as a union of balls.
    pub fn compact(&self) -> Result<CompactSpec> {
        match parse_sets(&self.sets) {
            Ok(balls) => Ok(CompactSpec::Balls(balls.into_iter().flatten().collect())),
            Err(msgs) => Err(QpotError::Config(
                msgs.into_iter().map(|m| format!("sets: {m}")).collect(),
            )),
        }
    }

    /// The `[config]` entries, in a fixed canonical order.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let f = |x: f64| crate::table::cell(x);
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| crate::table::cell(*x))
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            ("command".into(), self.command.clone()),
            ("n".into(), self.n.to_string()),
            ("resolution".into(), self.resolution.to_string()),
            ("domain_radius".into(), f(self.domain_radius)),
            ("sets".into(), self.sets.join(" ")),
            ("seed".into(), self.seed.to_string()),
            ("count".into(), self.count.to_string()),
            ("pairs".into(), self.pairs.to_string()),
            ("tolerance".into(), f(self.tolerance)),
            ("function".into(), self.function.clone()),
            ("inject".into(), self.inject.clone()),
            ("thresholds".into(), list(&self.thresholds)),
            ("radii".into(), list(&self.radii)),
            ("pole_depth".into(), f(self.pole_depth)),
            (
                "axiom_resolution".into(),
                self.axiom_resolution.to_string(),
            ),
            (
                "convergence_resolution".into(),
                self.convergence_resolution.to_string(),
            ),
            (
                "output_dir".into(),
                self.output_dir.to_string_lossy().into_owned(),
            ),
        ]
    }

    /// Rebuild a config from the `[config]` section of a manifest,
    /// reporting every malformed, unknown, or missing entry at once.
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let entries = manifest.section("config").ok_or_else(|| {
            QpotError::Parse("manifest has no [config] section".to_string())
        })?;
        let mut cfg = ExperimentConfig::new("verify-all");
        let mut problems = Vec::new();
        let mut seen = Vec::new();
        for (key, value) in entries {
            if seen.contains(key) {
                problems.push(format!("{key}: given more than once"));
                continue;
            }
            seen.push(key.clone());
            let r = apply_entry(&mut cfg, key, value);
            if let Err(msg) = r {
                problems.push(msg);
            }
        }
        for required in REQUIRED_KEYS {
            if !seen.iter().any(|k| k == required) {
                problems.push(format!("{required}: missing from [config]"));
            }
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(QpotError::Config(problems))
        }
    }

    /// Serialize to a bare manifest holding only the `[config]` section.
    /// Runs append their own `[versions]`, `[timing]`, and `[result]`
    /// sections to this.
    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        m.push_section("config", self.manifest_entries())
            .expect("canonical entries are well formed");
        m
    }
}

const REQUIRED_KEYS: [&str; 17] = [
    "command",
    "n",
    "resolution",
    "domain_radius",
    "sets",
    "seed",
    "count",
    "pairs",
    "tolerance",
    "function",
    "inject",
    "thresholds",
    "radii",
    "pole_depth",
    "axiom_resolution",
    "convergence_resolution",
    "output_dir",
];

fn apply_entry(
    cfg: &mut ExperimentConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    fn int<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
        v.parse()
            .map_err(|_| format!("{key}: expected an integer, got {v:?}"))
    }
    fn num(key: &str, v: &str) -> std::result::Result<f64, String> {
        v.parse()
            .map_err(|_| format!("{key}: expected a number, got {v:?}"))
    }
    fn nums(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
        v.split(',')
            .map(|p| {
                p.parse()
                    .map_err(|_| format!("{key}: expected comma-separated numbers, got {v:?}"))
            })
            .collect()
    }
    match key {
        "command" => cfg.command = value.to_string(),
        "n" => cfg.n = int(key, value)?,
        "resolution" => cfg.resolution = int(key, value)?,
        "domain_radius" => cfg.domain_radius = num(key, value)?,
        "sets" => cfg.sets = value.split_whitespace().map(str::to_string).collect(),
        "seed" => cfg.seed = int(key, value)?,
        "count" => cfg.count = int(key, value)?,
        "pairs" => cfg.pairs = int(key, value)?,
        "tolerance" => cfg.tolerance = num(key, value)?,
        "function" => cfg.function = value.to_string(),
        "inject" => cfg.inject = value.to_string(),
        "thresholds" => cfg.thresholds = nums(key, value)?,
        "radii" => cfg.radii = nums(key, value)?,
        "pole_depth" => cfg.pole_depth = num(key, value)?,
        "axiom_resolution" => cfg.axiom_resolution = int(key, value)?,
        "convergence_resolution" => cfg.convergence_resolution = int(key, value)?,
        "output_dir" => cfg.output_dir = PathBuf::from(value),
        other => return Err(format!("{other}: unknown [config] key")),
    }
    Ok(())
}

/// Parse one compact set spec. Formats:
///
/// * `ball:R` for a ball of radius R at the origin,
/// * `ball:R@c0,c1,c2,c3` for a ball at the given center,
/// * `point:c0,c1,c2,c3` for a single point (radius zero),
/// * `empty` for the empty set (no balls).
pub fn parse_set_spec(spec: &str) -> std::result::Result<Vec<Ball>, String> {
    if spec == "empty" {
        return Ok(Vec::new());
    }
    let parse_center = |text: &str| -> std::result::Result<[f64; 4], String> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 4 {
            return Err(format!(
                "{spec:?}: center needs exactly 4 comma-separated coordinates"
            ));
        }
        let mut c = [0.0; 4];
        for (i, p) in parts.iter().enumerate() {
            c[i] = p
                .parse()
                .map_err(|_| format!("{spec:?}: bad coordinate {p:?}"))?;
        }
        Ok(c)
    };
    if let Some(rest) = spec.strip_prefix("ball:") {
        let (radius_text, center) = match rest.split_once('@') {
            Some((r, c)) => (r, parse_center(c)?),
            None => (rest, [0.0; 4]),
        };
        let radius: f64 = radius_text
            .parse()
            .map_err(|_| format!("{spec:?}: bad radius {radius_text:?}"))?;
        let ball =
            Ball::new(center, radius).map_err(|e| format!("{spec:?}: {e}"))?;
        Ok(vec![ball])
    } else if let Some(rest) = spec.strip_prefix("point:") {
        let center = parse_center(rest)?;
        let ball = Ball::new(center, 0.0).map_err(|e| format!("{spec:?}: {e}"))?;
        Ok(vec![ball])
    } else {
        Err(format!(
            "{spec:?}: expected ball:R, ball:R@c0,c1,c2,c3, point:c0,c1,c2,c3, or empty"
        ))
    }
}

fn parse_sets(specs: &[String]) -> std::result::Result<Vec<Vec<Ball>>, Vec<String>> {
    if specs.is_empty() {
        return Err(vec!["need at least one set spec".to_string()]);
    }
    if specs.len() > 1 && specs.iter().any(|s| s == "empty") {
        return Err(vec![
            "the empty spec cannot be combined with other specs".to_string()
        ]);
    }
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for spec in specs {
        match parse_set_spec(spec) {
            Ok(balls) => out.push(balls),
            Err(msg) => problems.push(msg),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(problems)
    }
}

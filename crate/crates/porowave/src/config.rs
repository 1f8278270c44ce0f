//! Plain-text run configuration: line-based sections with `key = value`
//! entries, strict about unknown and duplicate keys so typos in study sweeps
//! fail fast.
//!
//! Sections: `[model]`, `[grid]`, `[initial]`, `[time]`, `[output]`,
//! `[study]`. Piecewise initial data combines `region.<i> = box x0 x1
//! [y0 y1] <label>` entries with one `value.<label> = <rule>` per label;
//! cells not covered by any region carry the background label `M`.

use porowave_core::grid::{make_piecewise_initial, Field, Grid, Partition, Region, ValueRule};
use porowave_core::model::{CoefficientSet, ProbeSpec, Variant};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse { line: usize, message: String },
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::Validation(m) => write!(f, "config validation: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// Horizon specification: fixed, or chosen by the safe-horizon estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSpec {
    Fixed(f64),
    /// `select_safe_horizon` capped at `cap`.
    Auto { cap: f64 },
}

/// Which solver family a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Euler,
    Picard,
}

/// Parameters of the `[study]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub name: Option<String>,
    pub levels: usize,
    pub deltas: Vec<f64>,
    pub horizons: Vec<f64>,
    pub scalings: Vec<f64>,
    pub modes: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            name: None,
            levels: 3,
            deltas: vec![1e-2, 1e-3, 1e-4],
            horizons: Vec::new(),
            scalings: vec![1.0, 0.5, 0.25],
            modes: 32,
        }
    }
}

/// Fully parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub coeffs: CoefficientSet,
    pub probe: ProbeSpec,
    pub grid: Grid,
    pub partition: Partition,
    pub regions: Vec<(Region, u32)>,
    pub value_rules: Vec<(u32, ValueRule)>,
    pub phi0: Field,
    pub u0_rule: ValueRule,
    pub time: TimeSpec,
    pub steps: usize,
    pub mode: RunMode,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub xi_tol: f64,
    pub xi_max_iter: usize,
    pub gamma: f64,
    pub eps_min: f64,
    pub r_max: f64,
    pub frozen_u: Option<f64>,
    pub elliptic_tol: f64,
    pub jump_threshold: Option<f64>,
    pub stride: usize,
    pub vtk: bool,
    pub prefix: String,
    pub study: Option<StudyParams>,
}

impl Config {
    pub fn u0_field(&self) -> Field {
        Field::from_fn(self.grid, |x| self.u0_rule.eval(x))
    }
}

struct Section {
    name: String,
    entries: Vec<(usize, String, String)>,
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("malformed section header {line:?}"),
                });
            }
            let name = line[1..line.len() - 1].trim().to_string();
            const KNOWN: [&str; 6] = ["model", "grid", "initial", "time", "output", "study"];
            if !KNOWN.contains(&name.as_str()) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("unknown section [{name}]"),
                });
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.push(Section { name, entries: Vec::new() });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let section = sections.last_mut().ok_or(ConfigError::Parse {
            line: line_no,
            message: "entry before any [section] header".into(),
        })?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|(_, k, _)| *k == key) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key {key:?} in [{}]", section.name),
            });
        }
        section.entries.push((line_no, key, value.trim().to_string()));
    }
    Ok(sections)
}

struct EntryMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl EntryMap {
    fn new(section: Section) -> EntryMap {
        let mut entries = BTreeMap::new();
        for (line, key, value) in section.entries {
            entries.insert(key, (line, value));
        }
        EntryMap { entries }
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn finish(self, section: &str) -> Result<(), ConfigError> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key {key:?} in [{section}]"),
            });
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{key}: expected a number, got {value:?}"),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("{key}: expected a nonnegative integer, got {value:?}"),
    })
}

fn parse_numbers(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split_whitespace().map(|tok| parse_f64(line, key, tok)).collect()
}

macro_rules! take_number {
    ($sec:ident, $parser:ident, { $($key:literal => $target:expr,)* }) => {
        $(
            if let Some((line, v)) = $sec.take($key) {
                $target = $parser(line, $key, &v)?;
            }
        )*
    };
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::Parse {
            line,
            message: format!("{key}: expected true or false, got {value:?}"),
        }),
    }
}

fn parse_rule(line: usize, d: usize, value: &str) -> Result<ValueRule, ConfigError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let bad = |msg: &str| ConfigError::Parse { line, message: format!("value rule: {msg}") };
    let need = |n: usize| -> Result<(), ConfigError> {
        if tokens.len() != n {
            Err(bad(&format!("expected {} arguments, got {}", n - 1, tokens.len() - 1)))
        } else {
            Ok(())
        }
    };
    let f = |i: usize| parse_f64(line, "rule", tokens[i]);
    match tokens.first().copied() {
        Some("const") => {
            need(2)?;
            Ok(ValueRule::Constant(f(1)?))
        }
        Some("affine") => {
            need(2 + d)?;
            let slope = if d == 1 { [f(1)?, 0.0] } else { [f(1)?, f(2)?] };
            Ok(ValueRule::Affine { slope, offset: f(1 + d)? })
        }
        Some("cusp") => {
            need(4 + d)?;
            let x0 = if d == 1 { [f(1)?, 0.0] } else { [f(1)?, f(2)?] };
            Ok(ValueRule::PowerCusp { x0, gamma: f(1 + d)?, scale: f(2 + d)?, offset: f(3 + d)? })
        }
        Some("bump") => {
            need(4 + d)?;
            let x0 = if d == 1 { [f(1)?, 0.0] } else { [f(1)?, f(2)?] };
            Ok(ValueRule::GaussianBump {
                x0,
                width: f(1 + d)?,
                amplitude: f(2 + d)?,
                offset: f(3 + d)?,
            })
        }
        other => Err(bad(&format!("unknown profile {other:?} (const, affine, cusp, bump)"))),
    }
}

fn rule_to_string(rule: &ValueRule, d: usize) -> String {
    match rule {
        ValueRule::Constant(c) => format!("const {c}"),
        ValueRule::Affine { slope, offset } => {
            if d == 1 {
                format!("affine {} {}", slope[0], offset)
            } else {
                format!("affine {} {} {}", slope[0], slope[1], offset)
            }
        }
        ValueRule::PowerCusp { x0, gamma, scale, offset } => {
            if d == 1 {
                format!("cusp {} {gamma} {scale} {offset}", x0[0])
            } else {
                format!("cusp {} {} {gamma} {scale} {offset}", x0[0], x0[1])
            }
        }
        ValueRule::GaussianBump { x0, width, amplitude, offset } => {
            if d == 1 {
                format!("bump {} {width} {amplitude} {offset}", x0[0])
            } else {
                format!("bump {} {} {width} {amplitude} {offset}", x0[0], x0[1])
            }
        }
    }
}

pub fn parse_config_file(path: &std::path::Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let sections = split_sections(text)?;
    let mut model = None;
    let mut grid_sec = None;
    let mut initial = None;
    let mut time_sec = None;
    let mut output = None;
    let mut study_sec = None;
    for section in sections {
        match section.name.as_str() {
            "model" => model = Some(EntryMap::new(section)),
            "grid" => grid_sec = Some(EntryMap::new(section)),
            "initial" => initial = Some(EntryMap::new(section)),
            "time" => time_sec = Some(EntryMap::new(section)),
            "output" => output = Some(EntryMap::new(section)),
            "study" => study_sec = Some(EntryMap::new(section)),
            _ => unreachable!("unknown sections rejected earlier"),
        }
    }
    let mut model = model.ok_or(ConfigError::Validation("missing [model] section".into()))?;
    let mut grid_sec =
        grid_sec.ok_or(ConfigError::Validation("missing [grid] section".into()))?;
    let mut initial =
        initial.ok_or(ConfigError::Validation("missing [initial] section".into()))?;

    // [grid]
    let d = match grid_sec.take("d") {
        Some((line, v)) => parse_usize(line, "d", &v)?,
        None => 1,
    };
    if d != 1 && d != 2 {
        return Err(ConfigError::Validation(format!("grid dimension {d} not in {{1, 2}}")));
    }
    let extents = match grid_sec.take("extent") {
        Some((line, v)) => {
            let nums = parse_numbers(line, "extent", &v)?;
            if nums.len() != d {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("extent: expected {d} numbers, got {}", nums.len()),
                });
            }
            if d == 1 {
                [nums[0], 1.0]
            } else {
                [nums[0], nums[1]]
            }
        }
        None => [1.0, 1.0],
    };
    let cells = match grid_sec.take("cells") {
        Some((line, v)) => {
            let toks: Vec<&str> = v.split_whitespace().collect();
            if toks.len() != d {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("cells: expected {d} integers, got {}", toks.len()),
                });
            }
            let nx = parse_usize(line, "cells", toks[0])?;
            let ny = if d == 2 { parse_usize(line, "cells", toks[1])? } else { 1 };
            [nx, ny]
        }
        None => return Err(ConfigError::Validation("grid: missing cells".into())),
    };
    grid_sec.finish("grid")?;
    let grid = if d == 1 {
        Grid::new_1d(extents[0], cells[0])
    } else {
        Grid::new_2d(extents, cells)
    }
    .map_err(|e| ConfigError::Validation(format!("{e}")))?;

    // [model]
    let mut coeffs = CoefficientSet::default();
    let mut probe = ProbeSpec::default();
    if let Some((line, v)) = model.take("variant") {
        coeffs.variant = match v.as_str() {
            "small-porosity" => Variant::SmallPorosity,
            "log-transformed" => Variant::LogTransformed,
            "viscous-small" => Variant::ViscousSmall,
            "viscous-full" => Variant::ViscousFull,
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown variant {other:?}"),
                })
            }
        };
    }
    take_number!(model, parse_f64, {
        "a0" => coeffs.a0,
        "n" => coeffs.n,
        "b0" => coeffs.b0,
        "m" => coeffs.m,
        "c0" => coeffs.c0,
        "c1" => coeffs.c1,
        "c2" => coeffs.c2,
        "Q" => coeffs.q,
        "eps" => coeffs.eps,
        "R" => coeffs.r,
    });
    if let Some((line, v)) = model.take("f") {
        let nums = parse_numbers(line, "f", &v)?;
        if nums.len() != d {
            return Err(ConfigError::Parse {
                line,
                message: format!("f: expected {d} components, got {}", nums.len()),
            });
        }
        coeffs.f = if d == 1 { [nums[0], 0.0] } else { [nums[0], nums[1]] };
    }
    if let Some((line, v)) = model.take("probe") {
        let nums = parse_numbers(line, "probe", &v)?;
        if nums.len() != 3 {
            return Err(ConfigError::Parse {
                line,
                message: format!("probe: expected lo hi samples, got {} numbers", nums.len()),
            });
        }
        probe = ProbeSpec { lo: nums[0], hi: nums[1], samples: nums[2] as usize };
    }
    model.finish("model")?;

    // structural validation of the model section
    let report = coeffs.validate_assumptions(&probe);
    if !report.pass {
        return Err(ConfigError::Validation(format!(
            "model assumptions violated: {}",
            report.reasons.join("; ")
        )));
    }

    // [initial]
    let mut regions: Vec<(Region, u32)> = Vec::new();
    let mut region_entries: Vec<(usize, usize, String)> = Vec::new();
    let mut value_entries: Vec<(usize, u32, String)> = Vec::new();
    let mut u0_rule = ValueRule::Constant(0.0);
    let mut jump_threshold = None;
    let mut labels_declared = None;
    {
        let keys: Vec<String> = initial.entries.keys().cloned().collect();
        for key in keys {
            if let Some(index) = key.strip_prefix("region.") {
                let (line, v) = initial.take(&key).expect("key listed");
                let idx: usize = index.parse().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("bad region index in {key:?}"),
                })?;
                region_entries.push((idx, line, v));
            } else if let Some(label) = key.strip_prefix("value.") {
                let (line, v) = initial.take(&key).expect("key listed");
                let label: u32 = label.parse().map_err(|_| ConfigError::Parse {
                    line,
                    message: format!("bad label in {key:?}"),
                })?;
                value_entries.push((line, label, v));
            }
        }
    }
    region_entries.sort();
    for (_, line, v) in &region_entries {
        let tokens: Vec<&str> = v.split_whitespace().collect();
        // box x0 x1 [y0 y1] label
        let expected = if d == 1 { 4 } else { 6 };
        if tokens.first() != Some(&"box") || tokens.len() != expected {
            return Err(ConfigError::Parse {
                line: *line,
                message: format!(
                    "region: expected box x0 x1 {}label, got {v:?}",
                    if d == 2 { "y0 y1 " } else { "" }
                ),
            });
        }
        let x0 = parse_f64(*line, "region", tokens[1])?;
        let x1 = parse_f64(*line, "region", tokens[2])?;
        let (y0, y1) = if d == 2 {
            (parse_f64(*line, "region", tokens[3])?, parse_f64(*line, "region", tokens[4])?)
        } else {
            (-f64::INFINITY, f64::INFINITY)
        };
        let label: u32 =
            tokens[expected - 1].parse().map_err(|_| ConfigError::Parse {
                line: *line,
                message: format!("region: bad label {:?}", tokens[expected - 1]),
            })?;
        regions.push((Region::Box { x0, x1, y0, y1 }, label));
    }
    if let Some((line, v)) = initial.take("labels") {
        labels_declared = Some(parse_usize(line, "labels", &v)? as u32);
    }
    if let Some((line, v)) = initial.take("u0") {
        u0_rule = parse_rule(line, d, &v)?;
    }
    if let Some((line, v)) = initial.take("jump-threshold") {
        jump_threshold = Some(parse_f64(line, "jump-threshold", &v)?);
    }
    initial.finish("initial")?;

    let max_region_label = regions.iter().map(|(_, l)| *l).max().unwrap_or(0);
    let m = labels_declared.unwrap_or(max_region_label + 1).max(max_region_label + 1).max(1);
    let mut labels = vec![m; grid.num_cells()];
    for idx in 0..grid.num_cells() {
        let x = grid.cell_center(idx);
        for (region, label) in &regions {
            if region.contains(x) {
                labels[idx] = *label;
            }
        }
    }
    let partition = Partition::new(grid, labels, m)
        .map_err(|e| ConfigError::Validation(format!("partition: {e}")))?;

    let mut value_rules: Vec<(u32, ValueRule)> = Vec::new();
    for (line, label, v) in &value_entries {
        value_rules.push((*label, parse_rule(*line, d, v)?));
    }
    value_rules.sort_by_key(|(l, _)| *l);
    let phi0 = make_piecewise_initial(&partition, &value_rules)
        .map_err(|e| ConfigError::Validation(format!("initial data: {e}")))?;

    // [time]
    let mut time = TimeSpec::Fixed(1.0);
    let mut t_cap = 10.0;
    let mut steps = 100usize;
    let mut mode = RunMode::Euler;
    let mut picard_tol = 1e-8;
    let mut picard_max_iter = 40usize;
    let mut inner_tol = 1e-10;
    let mut inner_max_iter = 30usize;
    let mut xi_tol = 1e-10;
    let mut xi_max_iter = 60usize;
    let mut gamma = 0.5;
    let mut eps_min = coeffs.eps;
    let mut r_max = coeffs.r;
    let mut frozen_u = None;
    let mut elliptic_tol = 1e-12;
    if let Some(mut sec) = time_sec {
        if let Some((line, v)) = sec.take("T") {
            time = if v == "auto" {
                TimeSpec::Auto { cap: t_cap }
            } else {
                TimeSpec::Fixed(parse_f64(line, "T", &v)?)
            };
        }
        if let Some((line, v)) = sec.take("T-cap") {
            t_cap = parse_f64(line, "T-cap", &v)?;
            if let TimeSpec::Auto { .. } = time {
                time = TimeSpec::Auto { cap: t_cap };
            }
        }
        if let Some((line, v)) = sec.take("N") {
            steps = parse_usize(line, "N", &v)?;
        }
        if let Some((line, v)) = sec.take("mode") {
            mode = match v.as_str() {
                "euler" => RunMode::Euler,
                "picard" => RunMode::Picard,
                other => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("unknown mode {other:?} (euler, picard)"),
                    })
                }
            };
        }
        take_number!(sec, parse_f64, {
            "picard-tol" => picard_tol,
            "inner-tol" => inner_tol,
            "xi-tol" => xi_tol,
            "gamma" => gamma,
            "eps-min" => eps_min,
            "r-max" => r_max,
            "elliptic-tol" => elliptic_tol,
        });
        take_number!(sec, parse_usize, {
            "picard-max-iter" => picard_max_iter,
            "inner-max-iter" => inner_max_iter,
            "xi-max-iter" => xi_max_iter,
        });
        if let Some((line, v)) = sec.take("frozen-u") {
            frozen_u = Some(parse_f64(line, "frozen-u", &v)?);
        }
        sec.finish("time")?;
    }

    // [output]
    let mut stride = 1usize;
    let mut vtk = false;
    let mut prefix = String::from("run");
    if let Some(mut sec) = output {
        if let Some((line, v)) = sec.take("stride") {
            stride = parse_usize(line, "stride", &v)?.max(1);
        }
        if let Some((line, v)) = sec.take("vtk") {
            vtk = parse_bool(line, "vtk", &v)?;
        }
        if let Some((_, v)) = sec.take("prefix") {
            prefix = v;
        }
        sec.finish("output")?;
    }

    // [study]
    let mut study = None;
    if let Some(mut sec) = study_sec {
        let mut params = StudyParams::default();
        if let Some((_, v)) = sec.take("name") {
            params.name = Some(v);
        }
        if let Some((line, v)) = sec.take("levels") {
            params.levels = parse_usize(line, "levels", &v)?;
        }
        if let Some((line, v)) = sec.take("deltas") {
            params.deltas = parse_numbers(line, "deltas", &v)?;
        }
        if let Some((line, v)) = sec.take("horizons") {
            params.horizons = parse_numbers(line, "horizons", &v)?;
        }
        if let Some((line, v)) = sec.take("scalings") {
            params.scalings = parse_numbers(line, "scalings", &v)?;
        }
        if let Some((line, v)) = sec.take("modes") {
            params.modes = parse_usize(line, "modes", &v)?;
        }
        sec.finish("study")?;
        study = Some(params);
    }

    Ok(Config {
        coeffs,
        probe,
        grid,
        partition,
        regions,
        value_rules,
        phi0,
        u0_rule,
        time,
        steps,
        mode,
        picard_tol,
        picard_max_iter,
        inner_tol,
        inner_max_iter,
        xi_tol,
        xi_max_iter,
        gamma,
        eps_min,
        r_max,
        frozen_u,
        elliptic_tol,
        jump_threshold,
        stride,
        vtk,
        prefix,
        study,
    })
}

/// Canonical serialization; parsing the echo reproduces the config, so
/// `parse -> echo` is a fixed point of `echo . parse`.
pub fn echo_config(config: &Config) -> String {
    let d = config.grid.dim();
    let mut out = String::new();
    out.push_str("[model]\n");
    out.push_str(&format!("variant = {}\n", config.coeffs.variant.name()));
    let c = &config.coeffs;
    out.push_str(&format!("a0 = {}\n", c.a0));
    out.push_str(&format!("n = {}\n", c.n));
    out.push_str(&format!("b0 = {}\n", c.b0));
    out.push_str(&format!("m = {}\n", c.m));
    out.push_str(&format!("c0 = {}\n", c.c0));
    out.push_str(&format!("c1 = {}\n", c.c1));
    out.push_str(&format!("c2 = {}\n", c.c2));
    out.push_str(&format!("Q = {}\n", c.q));
    if d == 1 {
        out.push_str(&format!("f = {}\n", c.f[0]));
    } else {
        out.push_str(&format!("f = {} {}\n", c.f[0], c.f[1]));
    }
    out.push_str(&format!("eps = {}\n", c.eps));
    out.push_str(&format!("R = {}\n", c.r));
    out.push_str(&format!(
        "probe = {} {} {}\n",
        config.probe.lo, config.probe.hi, config.probe.samples
    ));

    out.push_str("\n[grid]\n");
    out.push_str(&format!("d = {d}\n"));
    if d == 1 {
        out.push_str(&format!("extent = {}\n", config.grid.extents()[0]));
        out.push_str(&format!("cells = {}\n", config.grid.cells()[0]));
    } else {
        out.push_str(&format!(
            "extent = {} {}\n",
            config.grid.extents()[0],
            config.grid.extents()[1]
        ));
        out.push_str(&format!("cells = {} {}\n", config.grid.cells()[0], config.grid.cells()[1]));
    }

    out.push_str("\n[initial]\n");
    out.push_str(&format!("labels = {}\n", config.partition.subdomains()));
    for (i, (region, label)) in config.regions.iter().enumerate() {
        if let Region::Box { x0, x1, y0, y1 } = region {
            if d == 1 {
                out.push_str(&format!("region.{} = box {x0} {x1} {label}\n", i + 1));
            } else {
                out.push_str(&format!("region.{} = box {x0} {x1} {y0} {y1} {label}\n", i + 1));
            }
        }
    }
    for (label, rule) in &config.value_rules {
        out.push_str(&format!("value.{label} = {}\n", rule_to_string(rule, d)));
    }
    out.push_str(&format!("u0 = {}\n", rule_to_string(&config.u0_rule, d)));
    if let Some(th) = config.jump_threshold {
        out.push_str(&format!("jump-threshold = {th}\n"));
    }

    out.push_str("\n[time]\n");
    match config.time {
        TimeSpec::Fixed(t) => out.push_str(&format!("T = {t}\n")),
        TimeSpec::Auto { cap } => {
            out.push_str("T = auto\n");
            out.push_str(&format!("T-cap = {cap}\n"));
        }
    }
    out.push_str(&format!("N = {}\n", config.steps));
    out.push_str(&format!(
        "mode = {}\n",
        match config.mode {
            RunMode::Euler => "euler",
            RunMode::Picard => "picard",
        }
    ));
    out.push_str(&format!("picard-tol = {}\n", config.picard_tol));
    out.push_str(&format!("picard-max-iter = {}\n", config.picard_max_iter));
    out.push_str(&format!("inner-tol = {}\n", config.inner_tol));
    out.push_str(&format!("inner-max-iter = {}\n", config.inner_max_iter));
    out.push_str(&format!("xi-tol = {}\n", config.xi_tol));
    out.push_str(&format!("xi-max-iter = {}\n", config.xi_max_iter));
    out.push_str(&format!("gamma = {}\n", config.gamma));
    out.push_str(&format!("eps-min = {}\n", config.eps_min));
    out.push_str(&format!("r-max = {}\n", config.r_max));
    if let Some(fu) = config.frozen_u {
        out.push_str(&format!("frozen-u = {fu}\n"));
    }
    out.push_str(&format!("elliptic-tol = {}\n", config.elliptic_tol));

    out.push_str("\n[output]\n");
    out.push_str(&format!("stride = {}\n", config.stride));
    out.push_str(&format!("vtk = {}\n", config.vtk));
    out.push_str(&format!("prefix = {}\n", config.prefix));

    if let Some(study) = &config.study {
        out.push_str("\n[study]\n");
        if let Some(name) = &study.name {
            out.push_str(&format!("name = {name}\n"));
        }
        out.push_str(&format!("levels = {}\n", study.levels));
        out.push_str(&format!(
            "deltas = {}\n",
            study.deltas.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        if !study.horizons.is_empty() {
            out.push_str(&format!(
                "horizons = {}\n",
                study.horizons.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
            ));
        }
        out.push_str(&format!(
            "scalings = {}\n",
            study.scalings.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        ));
        out.push_str(&format!("modes = {}\n", study.modes));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[model]
variant = viscous-small
c1 = 0.25
eps = 0.01
R = 0.9

[grid]
d = 1
extent = 1.0
cells = 16

[initial]
value.1 = const 0.2

[time]
T = 0.1
N = 8
";

    #[test]
    fn minimal_config_parses() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.grid.cells()[0], 16);
        assert_eq!(config.steps, 8);
        assert_eq!(config.partition.subdomains(), 1);
        assert_eq!(config.phi0.values()[0], 0.2);
    }

    #[test]
    fn echo_is_a_fixed_point() {
        let config = parse_config(MINIMAL).unwrap();
        let echo1 = echo_config(&config);
        let reparsed = parse_config(&echo1).unwrap();
        let echo2 = echo_config(&reparsed);
        assert_eq!(echo1, echo2);
    }

    #[test]
    fn sigma_bound_violation_rejected() {
        let text = MINIMAL.replace("c1 = 0.25", "c1 = 0.6");
        let err = parse_config(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("sigma"), "message: {msg}");
    }

    #[test]
    fn duplicate_and_unknown_keys_rejected() {
        let dup = format!("{MINIMAL}\n[output]\nstride = 1\nstride = 2\n");
        assert!(matches!(parse_config(&dup), Err(ConfigError::Parse { .. })));
        let unknown = format!("{MINIMAL}\n[output]\nstride = 1\nstrde = 2\n");
        let err = parse_config(&unknown).unwrap_err();
        assert!(format!("{err}").contains("unknown key"));
    }

    #[test]
    fn piecewise_regions_parse() {
        let text = "\
[model]
variant = viscous-small
eps = 0.01
R = 0.9

[grid]
d = 1
extent = 1.0
cells = 32

[initial]
region.1 = box 0.3 0.6 1
value.1 = const 0.3
value.2 = const 0.1

[time]
T = 0.05
N = 8
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.partition.subdomains(), 2);
        assert!(!config.partition.interface_faces().is_empty());
        let echo = echo_config(&config);
        let back = parse_config(&echo).unwrap();
        assert_eq!(back.phi0.values(), config.phi0.values());
    }
}

//! Canonical on-disk format for synthesized control plans: named
//! sections of `key = value` lines, sections and keys sorted, floats
//! printed with 17 significant digits so parsing and re-serializing a
//! plan reproduces it byte for byte. Node lists are stored as one
//! space-separated `values` entry per section, node by node.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use degen_rd::synthesis::BudgetTrace;
use degen_rd::{ControlPlan, PiecewiseStaticControl, ShapeDesign, SpatialGrid, StateVector};

const FORMAT_VERSION: u64 = 1;

/// 17 significant digits: enough to reproduce any finite f64 exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" ")
}

/// Serialize a plan into the canonical text form.
pub fn to_text(plan: &ControlPlan) -> Result<String> {
    let control = &plan.control;
    let grid = control.grid();
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut put = |section: &str, key: &str, value: String| {
        sections.entry(section.into()).or_default().insert(key.into(), value);
    };

    let all_finite = control.profiles().iter().flatten().all(|v| v.is_finite())
        && plan.initial.values().iter().all(|v| v.is_finite())
        && plan.target.values().iter().all(|v| v.is_finite());
    if !all_finite {
        bail!("refusing to store a plan with non-finite entries");
    }

    put("format", "version", FORMAT_VERSION.to_string());
    put("control", "horizon", fmt_float(control.horizon()));
    put("control", "n-cells", grid.n_cells().to_string());
    put("control", "n-slabs", control.n_slabs().to_string());
    put("breakpoints", "values", fmt_list(control.breakpoints()));
    for (k, profile) in control.profiles().iter().enumerate() {
        put(&format!("slab-{k:04}"), "values", fmt_list(profile));
    }
    put("dt-hints", "values", fmt_list(&plan.dt_hints));
    put("states", "epsilon", fmt_float(plan.epsilon));
    put("states", "terminal-error", fmt_float(plan.terminal_error));
    put("initial", "values", fmt_list(plan.initial.values()));
    put("target", "values", fmt_list(plan.target.values()));

    put("design", "scale", fmt_float(plan.design.scale));
    put("design-alpha", "values", fmt_list(&plan.design.alpha));
    put("design-state", "values", fmt_list(&plan.design.state));
    put("design-target", "values", fmt_list(&plan.design.target));
    put("design-window", "values", fmt_list(&plan.design.window));

    let t = &plan.trace;
    put("trace", "drain-rate", fmt_float(t.drain_rate));
    put("trace", "min-state", fmt_float(t.min_state));
    put("trace", "plateau-cells", fmt_float(t.plateau_cells));
    put("trace", "scale-factor", fmt_float(t.scale_factor));
    put("trace", "shape-core-budget", fmt_float(t.shape_core_budget));
    put("trace", "shape-core-error", fmt_float(t.shape_core_error));
    put("trace", "shape-margin", fmt_float(t.shape_margin));
    put("trace", "sigma-budget", fmt_float(t.sigma_budget));
    put("trace", "sigma-measured", fmt_float(t.sigma_measured));
    put("trace", "smoothing-budget", fmt_float(t.smoothing_budget));
    put("trace", "smoothing-error", fmt_float(t.smoothing_error));
    put("trace", "t-collar", fmt_float(t.t_collar));
    put("trace", "t-expand", fmt_float(t.t_expand));
    put("trace", "t-park", fmt_float(t.t_park));
    put("trace", "t-shape", fmt_float(t.t_shape));
    put("trace", "target-adjustment", fmt_float(t.target_adjustment));
    put("trace", "terminal-error", fmt_float(t.terminal_error));
    put("trace", "window-order", t.window_order.to_string());

    let mut out = String::new();
    for (name, entries) in &sections {
        writeln!(out, "[{name}]").expect("string write");
        for (key, value) in entries {
            writeln!(out, "{key} = {value}").expect("string write");
        }
        writeln!(out).expect("string write");
    }
    Ok(out)
}

/// Parse the canonical text form back into a plan.
pub fn from_text(text: &str) -> Result<ControlPlan> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            if sections.contains_key(name) {
                bail!("line {lineno}: duplicate section [{name}]");
            }
            sections.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`, got {line:?}"))?;
        let section = current
            .as_ref()
            .ok_or_else(|| anyhow!("line {lineno}: entry before any [section] header"))?;
        let entries = sections.get_mut(section).expect("current section exists");
        if entries.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
            bail!("line {lineno}: duplicate key {} in [{section}]", key.trim());
        }
    }

    let mut plan = Reader { sections };
    let version: u64 = plan.scalar("format", "version")?;
    if version != FORMAT_VERSION {
        bail!("unsupported plan format version {version} (expected {FORMAT_VERSION})");
    }
    let n_cells: usize = plan.scalar("control", "n-cells")?;
    let n_slabs: usize = plan.scalar("control", "n-slabs")?;
    let horizon: f64 = plan.scalar("control", "horizon")?;
    let grid = SpatialGrid::new(n_cells)?;

    let breakpoints = plan.list("breakpoints")?;
    if breakpoints.len() != n_slabs + 1 {
        bail!("breakpoints hold {} entries for {n_slabs} slabs", breakpoints.len());
    }
    if let Some(&last) = breakpoints.last() {
        if last != horizon {
            bail!("last breakpoint {last} disagrees with stored horizon {horizon}");
        }
    }
    let mut profiles = Vec::with_capacity(n_slabs);
    for k in 0..n_slabs {
        let profile = plan.list(&format!("slab-{k:04}"))?;
        if profile.len() != grid.n_nodes() {
            bail!("slab {k} holds {} nodes, grid has {}", profile.len(), grid.n_nodes());
        }
        profiles.push(profile);
    }
    let control = PiecewiseStaticControl::new(Arc::clone(&grid), breakpoints, profiles)?;

    let dt_hints = plan.list("dt-hints")?;
    if dt_hints.len() != n_slabs {
        bail!("dt-hints hold {} entries for {n_slabs} slabs", dt_hints.len());
    }
    let epsilon: f64 = plan.scalar("states", "epsilon")?;
    let terminal_error: f64 = plan.scalar("states", "terminal-error")?;
    let state_of = |name: &str, values: Vec<f64>| -> Result<StateVector> {
        if values.len() != grid.n_nodes() {
            bail!("[{name}] holds {} nodes, grid has {}", values.len(), grid.n_nodes());
        }
        Ok(StateVector::new(Arc::clone(&grid), values)?)
    };
    let initial = state_of("initial", plan.list("initial")?)?;
    let target = state_of("target", plan.list("target")?)?;

    let design = ShapeDesign {
        alpha: plan.list("design-alpha")?,
        scale: plan.scalar("design", "scale")?,
        state: plan.list("design-state")?,
        target: plan.list("design-target")?,
        window: plan.list("design-window")?,
    };
    let trace = BudgetTrace {
        t_park: plan.scalar("trace", "t-park")?,
        t_collar: plan.scalar("trace", "t-collar")?,
        t_expand: plan.scalar("trace", "t-expand")?,
        t_shape: plan.scalar("trace", "t-shape")?,
        plateau_cells: plan.scalar("trace", "plateau-cells")?,
        drain_rate: plan.scalar("trace", "drain-rate")?,
        scale_factor: plan.scalar("trace", "scale-factor")?,
        smoothing_budget: plan.scalar("trace", "smoothing-budget")?,
        smoothing_error: plan.scalar("trace", "smoothing-error")?,
        target_adjustment: plan.scalar("trace", "target-adjustment")?,
        sigma_budget: plan.scalar("trace", "sigma-budget")?,
        sigma_measured: plan.scalar("trace", "sigma-measured")?,
        shape_core_budget: plan.scalar("trace", "shape-core-budget")?,
        shape_core_error: plan.scalar("trace", "shape-core-error")?,
        window_order: plan.scalar("trace", "window-order")?,
        shape_margin: plan.scalar("trace", "shape-margin")?,
        terminal_error: plan.scalar("trace", "terminal-error")?,
        min_state: plan.scalar("trace", "min-state")?,
    };
    plan.finish()?;

    Ok(ControlPlan { control, dt_hints, epsilon, initial, target, terminal_error, trace, design })
}

struct Reader {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Result<String> {
        let entries = self
            .sections
            .get_mut(section)
            .ok_or_else(|| anyhow!("plan is missing section [{section}]"))?;
        let value =
            entries.remove(key).ok_or_else(|| anyhow!("[{section}] is missing key {key}"))?;
        if entries.is_empty() {
            self.sections.remove(section);
        }
        Ok(value)
    }

    fn scalar<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::error::Error + Send + Sync + 'static,
    {
        let raw = self.take(section, key)?;
        raw.parse().with_context(|| format!("[{section}] {key}: cannot parse {raw:?}"))
    }

    fn list(&mut self, section: &str) -> Result<Vec<f64>> {
        let raw = self.take(section, "values")?;
        raw.split_ascii_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .with_context(|| format!("[{section}] values: cannot parse {tok:?}"))
            })
            .collect()
    }

    /// Reject any leftover content so stale or misspelled entries are
    /// loud instead of silently ignored.
    fn finish(self) -> Result<()> {
        if let Some((section, entries)) = self.sections.iter().next() {
            let key = entries.keys().next().map(String::as_str).unwrap_or("<empty>");
            bail!("plan holds unexpected entry [{section}] {key}");
        }
        Ok(())
    }
}

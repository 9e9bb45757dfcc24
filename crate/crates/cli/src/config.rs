//! Flat `key = value` pipeline configuration.
//!
//! Every key has a default, so an empty file describes the reference cavity
//! experiment. Lines starting with `#` and trailing `# ...` are comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hjbpod::flow::ShapeKind;
use hjbpod::hjb::SweepMode;

use crate::error::{PipelineError, Result};

/// Weight on `‖w‖²` in the running cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateWeight {
    Fixed(f64),
    /// `hx·hy`, i.e. the cell area of the velocity grid.
    CellArea,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HjbBounds {
    /// `[-r, r]` per axis with `r = margin · max |wᵢ|` over the projected
    /// snapshots.
    Auto,
    /// One radius per reduced coordinate, or a single radius for all.
    Explicit(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeSelection {
    Ns,
    Stokes,
    Both,
}

impl ShapeSelection {
    pub fn kinds(self) -> Vec<ShapeKind> {
        match self {
            ShapeSelection::Ns => vec![ShapeKind::NavierStokesSteady],
            ShapeSelection::Stokes => vec![ShapeKind::StokesSteady],
            ShapeSelection::Both => vec![ShapeKind::NavierStokesSteady, ShapeKind::StokesSteady],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub nx: usize,
    pub ny: usize,
    pub nu: f64,
    pub lid: f64,
    /// Donor-cell blending; `None` picks `min(1.2·dt·lid·max(nx, ny), 1)`.
    pub upwind: Option<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub controls: Vec<f64>,
    pub state_weight: StateWeight,
    pub ell: usize,
    pub m_deim: usize,
    pub snapshot_horizon: f64,
    pub snapshot_count: usize,
    pub dt: f64,
    pub horizon: f64,
    pub report_times: Vec<f64>,
    pub k: f64,
    pub h: f64,
    pub hjb_bounds: HjbBounds,
    pub hjb_margin: f64,
    pub hjb_tol: f64,
    pub hjb_max_iters: usize,
    pub threads: usize,
    pub sweep: SweepMode,
    pub shape: ShapeSelection,
    pub steady_tol: f64,
    pub steady_max_steps: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            nu: 0.01,
            lid: 1.0,
            upwind: None,
            alpha: 0.01,
            lambda: 1.0,
            controls: vec![-1.0, 0.0, 1.0],
            state_weight: StateWeight::Fixed(1.0),
            ell: 3,
            m_deim: 6,
            snapshot_horizon: 4.0,
            snapshot_count: 80,
            dt: 0.01,
            horizon: 4.0,
            report_times: vec![0.5, 4.0],
            k: 0.2,
            h: 0.04,
            hjb_bounds: HjbBounds::Auto,
            hjb_margin: 1.5,
            hjb_tol: 1e-6,
            hjb_max_iters: 100_000,
            threads: 1,
            sweep: SweepMode::Jacobi,
            shape: ShapeSelection::Both,
            steady_tol: 1e-8,
            steady_max_steps: 200_000,
            out: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Config(format!("`{key}`: {}", reason.into()))
}

fn num<F: FromStr>(key: &str, value: &str) -> Result<F> {
    value.parse().map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Parses and validates a config file body.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut radius = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim(), &mut radius)?;
        }
        cfg.finish_bounds(radius)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides on top of the file contents.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        let mut radius = match &self.hjb_bounds {
            HjbBounds::Explicit(r) => Some(r.clone()),
            HjbBounds::Auto => None,
        };
        for o in overrides {
            let (key, value) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(key.trim(), value.trim(), &mut radius)?;
        }
        self.finish_bounds(radius)?;
        self.validate()?;
        Ok(self)
    }

    fn set(&mut self, key: &str, value: &str, radius: &mut Option<Vec<f64>>) -> Result<()> {
        match key {
            "nx" => self.nx = num(key, value)?,
            "ny" => self.ny = num(key, value)?,
            "nu" => self.nu = num(key, value)?,
            "lid" => self.lid = num(key, value)?,
            "upwind" => {
                self.upwind = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "alpha" => self.alpha = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "controls" => self.controls = list(key, value)?,
            "state_weight" => {
                self.state_weight = match value {
                    "cell_area" => StateWeight::CellArea,
                    v => StateWeight::Fixed(num(key, v)?),
                }
            }
            "ell" => self.ell = num(key, value)?,
            "m_deim" => self.m_deim = num(key, value)?,
            "snapshot_horizon" => self.snapshot_horizon = num(key, value)?,
            "snapshot_count" => self.snapshot_count = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "report_times" => self.report_times = list(key, value)?,
            "k" => self.k = num(key, value)?,
            "h" => self.h = num(key, value)?,
            "hjb_bounds" => {
                self.hjb_bounds = match value {
                    "auto" => HjbBounds::Auto,
                    "explicit" => HjbBounds::Explicit(Vec::new()),
                    v => return Err(bad(key, format!("expected auto or explicit, got `{v}`"))),
                }
            }
            "hjb_radius" => *radius = Some(list(key, value)?),
            "hjb_margin" => self.hjb_margin = num(key, value)?,
            "hjb_tol" => self.hjb_tol = num(key, value)?,
            "hjb_max_iters" => self.hjb_max_iters = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "sweep" => {
                self.sweep = match value {
                    "jacobi" => SweepMode::Jacobi,
                    "gauss-seidel" | "gauss_seidel" => SweepMode::GaussSeidel,
                    v => return Err(bad(key, format!("expected jacobi or gauss-seidel, got `{v}`"))),
                }
            }
            "shape" => {
                self.shape = match value {
                    "both" => ShapeSelection::Both,
                    v => match v.parse::<ShapeKind>().map_err(|e| bad(key, e))? {
                        ShapeKind::NavierStokesSteady => ShapeSelection::Ns,
                        ShapeKind::StokesSteady => ShapeSelection::Stokes,
                    },
                }
            }
            "steady_tol" => self.steady_tol = num(key, value)?,
            "steady_max_steps" => self.steady_max_steps = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(PipelineError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn finish_bounds(&mut self, radius: Option<Vec<f64>>) -> Result<()> {
        if let HjbBounds::Explicit(r) = &mut self.hjb_bounds {
            *r = radius.ok_or_else(|| bad("hjb_radius", "required when hjb_bounds = explicit"))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(key, format!("must be positive, got {v}")))
            }
        };
        if self.nx < 4 || self.ny < 4 {
            return Err(bad("nx/ny", "grid needs at least 4 cells per direction"));
        }
        positive("nu", self.nu)?;
        positive("lambda", self.lambda)?;
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("snapshot_horizon", self.snapshot_horizon)?;
        positive("k", self.k)?;
        positive("h", self.h)?;
        positive("hjb_margin", self.hjb_margin)?;
        positive("hjb_tol", self.hjb_tol)?;
        positive("steady_tol", self.steady_tol)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", "must be non-negative"));
        }
        if !self.lid.is_finite() {
            return Err(bad("lid", "must be finite"));
        }
        if let Some(g) = self.upwind {
            if !(0.0..=1.0).contains(&g) {
                return Err(bad("upwind", "must lie in [0, 1]"));
            }
        }
        if self.lambda * self.h >= 1.0 {
            return Err(bad(
                "lambda/h",
                format!("lambda * h = {} must be below 1", self.lambda * self.h),
            ));
        }
        if self.controls.is_empty() || self.controls.iter().any(|u| !u.is_finite()) {
            return Err(bad("controls", "need a nonempty list of finite values"));
        }
        if let StateWeight::Fixed(w) = self.state_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(bad("state_weight", "must be non-negative"));
            }
        }
        if self.ell == 0 {
            return Err(bad("ell", "must be at least 1"));
        }
        if self.m_deim == 0 {
            return Err(bad("m_deim", "must be at least 1"));
        }
        if self.snapshot_count == 0 {
            return Err(bad("snapshot_count", "must be at least 1"));
        }
        self.snapshot_stride()?;
        if self.report_times.is_empty() {
            return Err(bad("report_times", "need at least one time"));
        }
        for &t in &self.report_times {
            if !(t >= 0.0 && t <= self.horizon + 1e-9) {
                return Err(bad("report_times", format!("{t} outside [0, horizon]")));
            }
        }
        if self.threads == 0 {
            return Err(bad("threads", "must be at least 1"));
        }
        if self.sweep == SweepMode::GaussSeidel && self.threads > 1 {
            return Err(bad("sweep", "gauss-seidel runs on a single thread"));
        }
        if let HjbBounds::Explicit(r) = &self.hjb_bounds {
            if r.len() != 1 && r.len() != self.ell {
                return Err(bad("hjb_radius", format!("need 1 or {} radii", self.ell)));
            }
            for &v in r {
                positive("hjb_radius", v)?;
            }
        }
        Ok(())
    }

    /// Steps between consecutive snapshots.
    pub fn snapshot_stride(&self) -> Result<usize> {
        let spacing = self.snapshot_horizon / self.snapshot_count as f64 / self.dt;
        let stride = spacing.round();
        if stride < 1.0 || (spacing - stride).abs() > 1e-9 * spacing {
            return Err(bad(
                "snapshot_count",
                format!("snapshot spacing is {spacing} time steps, not a positive integer"),
            ));
        }
        Ok(stride as usize)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let spacing = self.snapshot_horizon / self.snapshot_count as f64;
        (1..=self.snapshot_count).map(|j| j as f64 * spacing).collect()
    }

    pub fn upwind_factor(&self) -> f64 {
        self.upwind
            .unwrap_or_else(|| (1.2 * self.dt * self.lid.abs() * self.nx.max(self.ny) as f64).min(1.0))
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to String");
        kv("nx", self.nx.to_string());
        kv("ny", self.ny.to_string());
        kv("nu", self.nu.to_string());
        kv("lid", self.lid.to_string());
        kv("upwind", self.upwind.map_or("auto".into(), |g| g.to_string()));
        kv("alpha", self.alpha.to_string());
        kv("lambda", self.lambda.to_string());
        kv("controls", join(&self.controls));
        kv(
            "state_weight",
            match self.state_weight {
                StateWeight::Fixed(w) => w.to_string(),
                StateWeight::CellArea => "cell_area".into(),
            },
        );
        kv("ell", self.ell.to_string());
        kv("m_deim", self.m_deim.to_string());
        kv("snapshot_horizon", self.snapshot_horizon.to_string());
        kv("snapshot_count", self.snapshot_count.to_string());
        kv("dt", self.dt.to_string());
        kv("horizon", self.horizon.to_string());
        kv("report_times", join(&self.report_times));
        kv("k", self.k.to_string());
        kv("h", self.h.to_string());
        match &self.hjb_bounds {
            HjbBounds::Auto => kv("hjb_bounds", "auto".into()),
            HjbBounds::Explicit(r) => {
                kv("hjb_bounds", "explicit".into());
                kv("hjb_radius", join(r));
            }
        }
        kv("hjb_margin", self.hjb_margin.to_string());
        kv("hjb_tol", self.hjb_tol.to_string());
        kv("hjb_max_iters", self.hjb_max_iters.to_string());
        kv("threads", self.threads.to_string());
        kv(
            "sweep",
            match self.sweep {
                SweepMode::Jacobi => "jacobi".into(),
                SweepMode::GaussSeidel => "gauss-seidel".into(),
            },
        );
        kv(
            "shape",
            match self.shape {
                ShapeSelection::Ns => "ns".into(),
                ShapeSelection::Stokes => "stokes".into(),
                ShapeSelection::Both => "both".into(),
            },
        );
        kv("steady_tol", self.steady_tol.to_string());
        kv("steady_max_steps", self.steady_max_steps.to_string());
        kv("out", self.out.display().to_string());
        s
    }
}

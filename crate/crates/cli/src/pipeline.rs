//! Pipeline stages. Each stage reads the artifacts of earlier stages from the
//! output directory and writes its own; nothing is passed in memory between
//! stages, so any stage can be rerun on its own.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hjbpod::closed_loop::{
    quiver_rows, rom_errors, run_closed_loop_full, run_closed_loop_rom, save_text, ClosedLoopReport, ErrorSeries,
};
use hjbpod::deim::{nonlinearity_snapshots, DeimInterpolant};
use hjbpod::flow::{steady_state, ShapeFunction, ShapeKind, SteadyOptions, Walls};
use hjbpod::hjb::{FeedbackPolicy, OnlineFeedback, SolveOptions, SolveReport};
use hjbpod::io::{load_field, save_field};
use hjbpod::rom::{CostParams, NonlinearityMode};
use hjbpod::{CavityGrid, FlowModel, PodBasis, RomSystem, SnapshotSet, StaggeredState, ValueGrid};
use tracing::{info, info_span, warn};

use crate::config::{HjbBounds, PipelineConfig, StateWeight};
use crate::error::{PipelineError, Result};

pub const SNAPSHOTS: &str = "snapshots.txt";
pub const BASIS: &str = "basis.txt";
pub const DEIM: &str = "deim.txt";
pub const TABLES: &str = "tables.csv";
pub const CONFIG_ECHO: &str = "config_used.txt";

pub fn steady_file(kind: ShapeKind) -> String {
    format!("field_steady_{kind}.txt")
}

pub fn rom_file(kind: ShapeKind) -> String {
    format!("rom_{kind}.txt")
}

pub fn value_file(kind: ShapeKind) -> String {
    format!("value_{kind}.txt")
}

pub fn policy_file(kind: ShapeKind) -> String {
    format!("policy_{kind}.txt")
}

pub fn hjb_log_file(kind: ShapeKind) -> String {
    format!("hjb_log_{kind}.txt")
}

pub fn report_file(kind: ShapeKind) -> String {
    format!("report_{kind}.csv")
}

pub fn rom_report_file(kind: ShapeKind) -> String {
    format!("report_rom_{kind}.csv")
}

pub fn trace_file(kind: ShapeKind) -> String {
    format!("trace_{kind}.csv")
}

pub fn controlled_field_file(kind: ShapeKind) -> String {
    format!("field_controlled_{kind}.txt")
}

pub const UNCONTROLLED_FIELD: &str = "field_uncontrolled.txt";

pub fn quiver_file(name: &str) -> String {
    format!("quiver_{name}.txt")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Reduce,
    SolveHjb,
    Control,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Simulate,
        Stage::Reduce,
        Stage::SolveHjb,
        Stage::Control,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Reduce => "reduce",
            Stage::SolveHjb => "solve-hjb",
            Stage::Control => "control",
            Stage::Report => "report",
        }
    }
}

/// Outcome of one shape's closed-loop runs, as written by `control`.
#[derive(Clone, Debug)]
pub struct ShapeOutcome {
    pub full: ClosedLoopReport<f64>,
    pub rom: ClosedLoopReport<f64>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    out: PathBuf,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        let out = cfg.out.clone();
        Self { cfg, out }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        let _span = info_span!("stage", name = stage.name()).entered();
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::Reduce => self.reduce(),
            Stage::SolveHjb => self.solve_hjb(),
            Stage::Control => self.control().map(|_| ()),
            Stage::Report => self.report(),
        }
    }

    pub fn run_all(&self) -> Result<()> {
        Stage::ALL.iter().try_for_each(|&s| self.run(s))
    }

    /// Existing upstream artifact, or an error naming the stage that makes it.
    fn input(&self, name: &str, stage: Stage) -> Result<PathBuf> {
        let path = self.path(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact {
                stage: stage.name(),
                path,
            })
        }
    }

    fn ensure_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|source| PipelineError::OutputDir {
            path: self.out.clone(),
            source,
        })?;
        // the echo omits `out` so runs in different directories compare equal
        let echo: String = self
            .cfg
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("out ="))
            .map(|l| format!("{l}\n"))
            .collect();
        save_text(&self.path(CONFIG_ECHO), &echo)?;
        Ok(())
    }

    fn grid(&self) -> Result<CavityGrid> {
        Ok(CavityGrid::new(self.cfg.nx, self.cfg.ny)?)
    }

    /// Uncontrolled cavity model without shape functions.
    pub fn flow_model(&self) -> Result<FlowModel> {
        let c = &self.cfg;
        Ok(FlowModel::new(
            self.grid()?,
            Walls::lid_driven(c.lid),
            c.nu,
            c.upwind_factor(),
        )?)
    }

    fn controlled_model(&self, kind: ShapeKind) -> Result<(FlowModel, ShapeFunction<f64>)> {
        let (grid, steady) = load_field::<f64>(&self.input(&steady_file(kind), Stage::Reduce)?)?;
        if grid != self.grid()? {
            return Err(PipelineError::Config(format!(
                "{} was computed on a {}x{} grid",
                steady_file(kind),
                grid.nx(),
                grid.ny()
            )));
        }
        let shape = ShapeFunction {
            kind,
            field: steady.velocity,
        };
        let model = self.flow_model()?.with_shapes(std::slice::from_ref(&shape))?;
        Ok((model, shape))
    }

    fn cost(&self) -> Result<CostParams<f64>> {
        let state_weight = match self.cfg.state_weight {
            StateWeight::Fixed(w) => w,
            StateWeight::CellArea => self.grid()?.cell_area(),
        };
        Ok(CostParams {
            alpha: self.cfg.alpha,
            lambda: self.cfg.lambda,
            state_weight,
        })
    }

    fn load_basis(&self) -> Result<PodBasis> {
        Ok(PodBasis::load(&self.input(BASIS, Stage::Reduce)?)?)
    }

    fn load_rom(&self, kind: ShapeKind, model: &FlowModel, basis: &PodBasis) -> Result<RomSystem> {
        Ok(RomSystem::load(
            &self.input(&rom_file(kind), Stage::Reduce)?,
            model,
            basis,
        )?)
    }

    /// Uncontrolled spin-up from rest; keeps every snapshot-stride state.
    pub fn simulate(&self) -> Result<()> {
        self.ensure_out()?;
        let c = &self.cfg;
        let model = self.flow_model()?;
        let stride = c.snapshot_stride()?;
        let stepper = model.stepper(c.dt)?;
        let y0 = StaggeredState::rest(model.grid());
        let mut kept: Vec<StaggeredState> = Vec::with_capacity(c.snapshot_count);
        stepper.simulate_observed(
            &y0,
            |_| vec![],
            c.snapshot_horizon,
            |n, s| {
                if n > 0 && n % stride == 0 {
                    kept.push(s.clone());
                }
                Ok(())
            },
        )?;
        let refs: Vec<&StaggeredState> = kept.iter().collect();
        let set = SnapshotSet::from_states(*model.grid(), &refs)?;
        info!(snapshots = set.len(), stride, "snapshot set");
        set.save(&self.path(SNAPSHOTS))?;
        Ok(())
    }

    /// POD basis, DEIM operator, steady shape functions and one reduced model
    /// per shape.
    pub fn reduce(&self) -> Result<()> {
        self.ensure_out()?;
        let c = &self.cfg;
        let set = SnapshotSet::load(&self.input(SNAPSHOTS, Stage::Simulate)?)?;
        let basis = PodBasis::compute(&set, c.ell)?;
        info!(
            ell = basis.dim(),
            gram_defect = basis.orthonormality_defect(),
            discarded_energy = basis.discarded_energy(),
            "POD basis"
        );
        basis.save(&self.path(BASIS))?;

        let model = self.flow_model()?;
        let fields: Vec<Vec<f64>> = (0..set.len()).map(|j| set.snapshot(j)).collect();
        let g = nonlinearity_snapshots(&model, fields.iter().map(Vec::as_slice))?;
        let deim = DeimInterpolant::from_snapshots(&g, c.m_deim)?;
        let op = deim.operator(basis.modes())?;
        op.save(&self.path(DEIM))?;

        let steady_opts = SteadyOptions {
            tol: c.steady_tol,
            max_steps: c.steady_max_steps,
            ..SteadyOptions::default()
        };
        for kind in c.shape.kinds() {
            let steady = steady_state(&model, kind, &steady_opts)?;
            info!(
                shape = kind.tag(),
                residual = steady.residual,
                iterations = steady.iterations,
                "steady state"
            );
            save_field(&self.path(&steady_file(kind)), model.grid(), &steady.state)?;
            let shape = ShapeFunction {
                kind,
                field: steady.state.velocity,
            };
            let shaped = model.clone().with_shapes(std::slice::from_ref(&shape))?;
            let rom = RomSystem::assemble(
                &shaped,
                &basis,
                &shape,
                NonlinearityMode::Deim(op.clone()),
                self.cost()?,
            )?;
            rom.save(&self.path(&rom_file(kind)))?;
        }
        Ok(())
    }

    /// Radii of the value-function box per reduced coordinate.
    fn hjb_radii(&self, basis: &PodBasis) -> Result<Vec<f64>> {
        let ell = basis.dim();
        match &self.cfg.hjb_bounds {
            HjbBounds::Explicit(r) if r.len() == 1 => Ok(vec![r[0]; ell]),
            HjbBounds::Explicit(r) => Ok(r.clone()),
            HjbBounds::Auto => {
                let set = SnapshotSet::load(&self.input(SNAPSHOTS, Stage::Simulate)?)?;
                let mut wmax = vec![0.0f64; ell];
                for j in 0..set.len() {
                    let w = basis.project(&set.snapshot(j))?;
                    for (m, x) in wmax.iter_mut().zip(&w) {
                        *m = m.max(x.abs());
                    }
                }
                Ok(wmax
                    .iter()
                    .map(|&m| (self.cfg.hjb_margin * m).max(self.cfg.k))
                    .collect())
            }
        }
    }

    pub fn solve_hjb(&self) -> Result<()> {
        self.ensure_out()?;
        let c = &self.cfg;
        let basis = self.load_basis()?;
        let radii = self.hjb_radii(&basis)?;
        let opts = SolveOptions {
            tol: c.hjb_tol,
            max_iters: c.hjb_max_iters,
            threads: c.threads,
            sweep: c.sweep,
        };
        for kind in c.shape.kinds() {
            let (model, _) = self.controlled_model(kind)?;
            let rom = self.load_rom(kind, &model, &basis)?;
            let mut grid = ValueGrid::symmetric(&radii, c.k, c.h, c.lambda)?;
            info!(shape = kind.tag(), nodes = grid.len(), counts = ?grid.counts(), "value grid");
            let report = grid.solve(&rom, &c.controls, &opts)?;
            if !report.converged {
                warn!(
                    shape = kind.tag(),
                    residual = report.residual,
                    "value iteration hit max_iters"
                );
            }
            grid.save(&self.path(&value_file(kind)))?;
            FeedbackPolicy::extract(&grid, &rom, &c.controls)?.save(&self.path(&policy_file(kind)))?;
            save_text(&self.path(&hjb_log_file(kind)), &hjb_log(&grid, &report))?;
        }
        Ok(())
    }

    /// Closed-loop runs of the full model and the reduced model under the
    /// value-function feedback, plus the shared uncontrolled reference.
    pub fn control(&self) -> Result<Vec<ShapeOutcome>> {
        self.ensure_out()?;
        let c = &self.cfg;
        let basis = self.load_basis()?;
        let capture = [c.report_times[0]];
        let mut outcomes = Vec::new();
        let mut uncontrolled: Option<ErrorSeries<f64>> = None;
        for kind in c.shape.kinds() {
            let (model, _) = self.controlled_model(kind)?;
            let rom = self.load_rom(kind, &model, &basis)?;
            let grid = ValueGrid::load(&self.input(&value_file(kind), Stage::SolveHjb)?)?;
            let feedback = OnlineFeedback::new(&grid, &rom, &c.controls)?;
            let stepper = model.stepper(c.dt)?;
            let y0 = StaggeredState::rest(model.grid());

            if uncontrolled.is_none() {
                let free = run_closed_loop_full(&stepper, &basis, &y0, |_| 0.0, c.horizon, &capture)?;
                save_field(&self.path(UNCONTROLLED_FIELD), model.grid(), &free.captured[0])?;
                uncontrolled = Some(free.errors);
            }
            let free = uncontrolled.as_ref().expect("uncontrolled run");

            let run = run_closed_loop_full(&stepper, &basis, &y0, |w| feedback.control(w), c.horizon, &capture)?;
            save_field(&self.path(&controlled_field_file(kind)), model.grid(), &run.captured[0])?;
            let full = ClosedLoopReport::build(kind, &run.errors, free, &run.controls, &c.report_times)?;
            info!(shape = kind.tag(), switches = full.switches(), "full-model closed loop");

            let w0 = basis.project(&y0.velocity)?;
            let traj = run_closed_loop_rom(&rom, &w0, |w| feedback.control(w), c.horizon, c.dt)?;
            let mut reduced =
                ClosedLoopReport::build(kind, &rom_errors(&basis, &traj)?, free, &traj.controls, &c.report_times)?;
            let cost = rom.reduced_cost(&traj);
            info!(
                shape = kind.tag(),
                cost = cost.value,
                tail_bound = cost.tail_bound,
                "reduced cost"
            );
            reduced.cost_estimate = Some((cost.value, cost.tail_bound));

            save_text(&self.path(&report_file(kind)), &full.to_csv())?;
            save_text(&self.path(&trace_file(kind)), &full.trace_csv())?;
            save_text(&self.path(&rom_report_file(kind)), &reduced.to_csv())?;
            outcomes.push(ShapeOutcome { full, rom: reduced });
        }
        Ok(outcomes)
    }

    /// Reads the report of one shape back from disk.
    pub fn load_report(&self, kind: ShapeKind) -> Result<ShapeOutcome> {
        let read = |name: String| -> Result<String> {
            let path = self.input(&name, Stage::Control)?;
            fs::read_to_string(&path).map_err(|source| hjbpod::Error::Io { path, source }.into())
        };
        let trace = read(trace_file(kind))?;
        Ok(ShapeOutcome {
            full: ClosedLoopReport::from_csv(&read(report_file(kind))?, &trace)?,
            rom: ClosedLoopReport::from_csv(&read(rom_report_file(kind))?, "t,u\n")?,
        })
    }

    /// Combined error table and quiver data at the first report time.
    pub fn report(&self) -> Result<()> {
        self.ensure_out()?;
        let mut table = String::from("shape_kind,t,err_controlled,err_uncontrolled,err_rom,switches\n");
        for kind in self.cfg.shape.kinds() {
            let o = self.load_report(kind)?;
            for (i, t) in o.full.times.iter().enumerate() {
                writeln!(
                    table,
                    "{kind},{t:e},{:e},{:e},{:e},{}",
                    o.full.err_controlled[i],
                    o.full.err_uncontrolled[i],
                    o.rom.err_controlled[i],
                    o.full.switches()
                )
                .expect("write to String");
            }
            let (grid, field) = load_field::<f64>(&self.input(&controlled_field_file(kind), Stage::Control)?)?;
            self.write_quiver(&format!("controlled_{kind}"), &grid, &field.velocity, field.time)?;
        }
        save_text(&self.path(TABLES), &table)?;

        let basis = self.load_basis()?;
        self.write_quiver("mean", basis.grid(), basis.mean(), self.cfg.report_times[0])?;
        let (grid, field) = load_field::<f64>(&self.input(UNCONTROLLED_FIELD, Stage::Control)?)?;
        self.write_quiver("uncontrolled", &grid, &field.velocity, field.time)?;
        Ok(())
    }

    fn write_quiver(&self, name: &str, grid: &CavityGrid, velocity: &[f64], t: f64) -> Result<()> {
        let text = format!("# t = {t:e}\n# x y u v\n{}", quiver_rows(grid, velocity)?);
        save_text(&self.path(&quiver_file(name)), &text)?;
        Ok(())
    }
}

fn hjb_log(grid: &ValueGrid, report: &SolveReport<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "# nodes {} counts {:?}", grid.len(), grid.counts()).expect("write to String");
    writeln!(
        s,
        "# iterations {} residual {:e} converged {} worst_contraction {:e} bound {:e}",
        report.iterations,
        report.residual,
        report.converged,
        report.worst_contraction,
        grid.contraction()
    )
    .expect("write to String");
    s.push_str("iter,residual,ratio\n");
    let mut prev: Option<f64> = None;
    for (i, &r) in report.residuals.iter().enumerate() {
        let ratio = prev
            .filter(|&p| p > 0.0)
            .map_or(String::new(), |p| format!("{:e}", r / p));
        writeln!(s, "{},{r:e},{ratio}", i + 1).expect("write to String");
        prev = Some(r);
    }
    s
}

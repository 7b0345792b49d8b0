use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affine_ipc::scene::{instantiate, read_scene_config, SceneConfig};
use affine_ipc::simapi::env::{EnvConfig, PegInHoleEnv, Task};
use affine_ipc::simapi::{protocol, run_headless, validation};
use affine_ipc::solver::SolverParams;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "affine-ipc", version, about = "Intersection-free articulated rigid-body simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene's motor schedule headless and write a trajectory.
    Run {
        scene: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Number of steps; defaults to the scene's own count.
        #[arg(long)]
        steps: Option<usize>,
        /// Directory for trajectory.jsonl and OBJ frames.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Dump an OBJ frame every this many steps (needs --output).
        #[arg(long)]
        obj_every: Option<usize>,
    },
    /// Serve the peg-in-hole environment over stdin/stdout.
    EnvServe {
        /// JSON file with environment constants.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the validation scenes and report pass/fail.
    Validate {
        /// Skip the grasp bisections, which dominate the runtime.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Barrier activation distance (m).
    #[arg(long)]
    dhat: Option<f64>,
    /// Time step (s).
    #[arg(long)]
    h: Option<f64>,
    /// Newton velocity tolerance (m/s).
    #[arg(long)]
    tol_v: Option<f64>,
    /// Friction coefficient for every body.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, params: &mut SolverParams) {
        if let Some(d) = self.dhat {
            params.barrier.dhat = d;
        }
        if let Some(h) = self.h {
            params.h = h;
        }
        if let Some(t) = self.tol_v {
            params.tol_v = t;
        }
    }

    fn apply_scene(&self, config: &mut SceneConfig) {
        self.apply(&mut config.params);
        if let Some(mu) = self.mu {
            config.props.iter_mut().for_each(|p| p.mu = Some(mu));
            config.robots.iter_mut().for_each(|r| r.mu = Some(mu));
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scene, overrides, steps, output, obj_every } => {
            run_scene(&scene, &overrides, steps, output.as_deref(), obj_every)?;
            Ok(true)
        }
        Command::EnvServe { config, overrides } => {
            let mut env = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
                    serde_json::from_str(&text).with_context(|| path.display().to_string())?
                }
                None => EnvConfig::default(),
            };
            overrides.apply(&mut env.params);
            if let Some(mu) = overrides.mu {
                env.mu = mu;
            }
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            protocol::serve(env, stdin, stdout)?;
            Ok(true)
        }
        Command::Validate { quick } => validate(quick),
    }
}

fn run_scene(path: &Path, overrides: &Overrides, steps: Option<usize>, output: Option<&Path>, obj_every: Option<usize>) -> Result<()> {
    let mut config = read_scene_config(path)?;
    overrides.apply_scene(&mut config);
    let steps = steps.unwrap_or(config.steps);
    let base = path.parent().unwrap_or(Path::new("."));
    let trajectory = output.map(|d| d.join("trajectory.jsonl")).or_else(|| config.output.trajectory.as_ref().map(|p| base.join(p)));
    let obj_dir = output.map(|d| d.join("frames")).or_else(|| config.output.obj_dir.as_ref().map(|p| base.join(p)));
    let every = obj_every.or(config.output.obj_every).unwrap_or(0);
    let mut scene = instantiate(config, base)?;
    let mut sink = match &trajectory {
        Some(p) => {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            }
            Some(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?))
        }
        None => None,
    };
    let obj = obj_dir.as_deref().filter(|_| every > 0).map(|d| (d, every));
    let records = run_headless(&mut scene, steps, sink.as_mut().map(|w| w as &mut dyn Write), obj)?;
    if let Some(w) = sink.as_mut() {
        w.flush()?;
    }
    let min = records.iter().filter_map(|r| r.min_contact_distance).fold(f64::INFINITY, f64::min);
    log::info!("{} steps, min contact distance {min:e}", records.len());
    println!("completed {} steps; min contact distance {}", records.len(), if min.is_finite() { format!("{min:e} m") } else { "n/a".into() });
    Ok(())
}

fn report(name: &str, pass: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn validate(quick: bool) -> Result<bool> {
    let mut ok = true;
    for width in [0.005, 0.009, 0.0099] {
        let b = validation::run_beam_insertion(width)?;
        ok &= report(
            &format!("beam insertion l={width}"),
            b.completed && b.audit.energy_monotone,
            format!("depth {:.4} m, min distance {:.3e} m", b.depth, b.min_distance),
        );
    }
    let dhat = 1e-7;
    let rest = validation::run_tiny_clearance(dhat)?;
    ok &= report("tiny clearance", rest.distance > 0.0 && rest.distance < dhat, format!("rest distance {:.3e} m with d̂ {dhat:e}", rest.distance));

    let mut env = PegInHoleEnv::new(EnvConfig::default());
    env.reset_at(Task::Easy, [0.0, 0.0])?;
    let mut last = None;
    while env.state().is_some_and(|s| !s.done) {
        last = Some(env.step([0.0, 0.0, -env.config.action_bound])?);
    }
    let Some(last) = last else { bail!("episode ended before the first step") };
    let horizontal = last.obs[0].hypot(last.obs[1]);
    ok &= report(
        "peg-in-hole straight down",
        last.info.success && horizontal <= env.config.margin(Task::Easy),
        format!("step {}, bonus {}, offset {horizontal:.2e} m", last.info.step, last.info.completion_reward),
    );

    if !quick {
        let sweep = validation::grasp_sweep(&[1000.0, 2000.0, 4000.0, 8000.0], 0.5, 0.01)?;
        ok &= report(
            "holding force ∝ mass",
            sweep.r_squared > 0.999 && sweep.slope_error() < 0.1,
            format!("forces {:?} N, R² {:.5}, slope {:.3} vs {:.3} N/kg", sweep.forces, sweep.r_squared, sweep.slope, sweep.coulomb_slope),
        );
        ok &= report(
            "holding force ∝ 1/μ",
            (sweep.half_mu_ratio() - 2.0).abs() < 0.2,
            format!("ratio {:.3}", sweep.half_mu_ratio()),
        );
    }
    Ok(ok)
}

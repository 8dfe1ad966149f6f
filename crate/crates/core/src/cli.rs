//! Command-line front end. Exit codes: 0 success, 1 I/O or parse error,
//! 2 model validation failure, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::branching::{analyze, build_branching_spec};
use crate::error::{Error, Result};
use crate::lvs::{
    find_equilibrium, find_lvs_equilibrium, integrate, sample_grid, EquilibriumOptions, EquilibriumReport,
    OdeOptions, PlasticField,
};
use crate::mc::{mc_invasion, McInvasionConfig};
use crate::micro::simulate;
use crate::model::{validate_model, DensityVector, ModelParams, PopulationState, Trait};
use crate::model_file::Model;
use crate::output::{branching_json, density_json, equilibrium_json, write_trajectory_csv};
use crate::pesp::{settle, simulate_pesp, PespOptions};
use crate::phenotype_graph::{build_switch_chain, check_recurrence, communicating_classes, reachable_traits, ClassMap};
use crate::rng::seeded;

#[derive(Debug, Parser)]
#[command(name = "plasticity", version, about = "Simulate and analyse plastic populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Io {
    /// Model file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check parameter invariants and switch-class recurrence.
    Validate(Io),
    /// Communicating switch classes per genotype.
    Classes(Io),
    /// Exact stochastic simulation; trajectory CSV in density units.
    Micro {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.1)]
        sample_dt: f64,
    },
    /// Deterministic system from the initial densities; trajectory CSV plus equilibrium JSON.
    Lvs {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.1)]
        sample_dt: f64,
        /// Equilibrium residual tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Equilibrium JSON path (default `<out>.equilibrium.json`, or stderr).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Integrate the full field with mutation over every trait.
        #[arg(long)]
        full: bool,
    },
    /// Invasion fitness of one mutant against the resident equilibrium.
    Fitness {
        #[command(flatten)]
        io: Io,
        /// Mutant trait "genotype,phenotype".
        #[arg(long)]
        mutant: String,
    },
    /// Extinction vectors of mutant classes (all classes outside the residents when no mutant is given).
    Qvec {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        mutant: Option<String>,
    },
    /// Jump process over coexisting equilibria; JSON-lines event log.
    Pesp {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        /// Initial density of an invading class.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
    /// Fixation frequency of one mutant in replicated micro simulations versus 1 - q.
    McInvasion {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        mutant: String,
        #[arg(long, default_value_t = 2000)]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mutant-class density that counts as fixation.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Classes(_) => "classes",
            Command::Micro { .. } => "micro",
            Command::Lvs { .. } => "lvs",
            Command::Fitness { .. } => "fitness",
            Command::Qvec { .. } => "qvec",
            Command::Pesp { .. } => "pesp",
            Command::McInvasion { .. } => "mc-invasion",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let name = cli.command.name();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{name}]: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else if e.is_numerical() {
        3
    } else {
        1
    }
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(out: Option<&Path>, v: &Value) -> Result<()> {
    let mut w = open_out(out)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Loads, validates and classifies a model file.
fn load(path: &Path) -> Result<(Model, ClassMap)> {
    let model = Model::load(path)?;
    let report = validate_model(&model.params);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.into_result()?;
    let classes = ClassMap::build(&model.params)?;
    Ok((model, classes))
}

fn parse_trait(params: &ModelParams, s: &str) -> Result<Trait> {
    params.space().parse_trait(s)
}

/// Equilibrium of the initial traits outside the class of `mutant`.
fn resident_equilibrium(
    params: &ModelParams,
    classes: &ClassMap,
    initial: &PopulationState,
    mutant: Option<Trait>,
) -> Result<DensityVector> {
    let space = params.space();
    let excluded = mutant.map(|m| classes.class_traits(m)).unwrap_or_default();
    let residents: Vec<Trait> = space
        .traits()
        .filter(|t| initial.counts[space.index(*t)] > 0 && !excluded.contains(t))
        .collect();
    let support = reachable_traits(space, &residents, classes)?;
    if support.is_empty() {
        return Ok(DensityVector::zeros(Vec::new()));
    }
    if let Some(t) = support.iter().find(|t| excluded.contains(t)) {
        return Err(Error::MutantInResidentClass(space.key(*t)));
    }
    let x0 = DensityVector::restrict(space, &initial.densities(), &support);
    Ok(find_lvs_equilibrium(params, classes, &x0, &EquilibriumOptions::default())?.equilibrium)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate(io) => validate(&io),
        Command::Classes(io) => classes(&io),
        Command::Micro { io, seed, t_end, sample_dt } => {
            let (model, _) = load(&io.config)?;
            let mut rng = seeded(seed);
            let traj = simulate(&model.initial, &model.params, t_end, sample_dt, &mut rng);
            let mut w = open_out(io.out.as_deref())?;
            let absorbed_at = traj.absorbed.then(|| *traj.times.last().expect("nonempty trajectory"));
            write_trajectory_csv(&mut w, model.params.space(), &traj.times, &traj.densities, absorbed_at)?;
            w.flush()?;
            Ok(0)
        }
        Command::Lvs {
            io,
            t_end,
            sample_dt,
            tol,
            report,
            full,
        } => lvs(&io, t_end, sample_dt, tol, report.as_deref(), full),
        Command::Fitness { io, mutant } => {
            let (model, classes) = load(&io.config)?;
            let params = &model.params;
            let m = parse_trait(params, &mutant)?;
            let resident = resident_equilibrium(params, &classes, &model.initial, Some(m))?;
            let a = analyze(build_branching_spec(params, &classes, &resident, m)?)?;
            write_json(io.out.as_deref(), &branching_json(params.space(), &resident, &a, Some(m)))?;
            Ok(0)
        }
        Command::Qvec { io, mutant } => {
            let (model, classes) = load(&io.config)?;
            let params = &model.params;
            let space = params.space();
            let out = match mutant {
                Some(s) => {
                    let m = parse_trait(params, &s)?;
                    let resident = resident_equilibrium(params, &classes, &model.initial, Some(m))?;
                    let a = analyze(build_branching_spec(params, &classes, &resident, m)?)?;
                    branching_json(space, &resident, &a, None)
                }
                None => {
                    let resident = resident_equilibrium(params, &classes, &model.initial, None)?;
                    let mut seen = Vec::new();
                    let mut list = Vec::new();
                    for t in space.traits() {
                        let class = classes.class_traits(t);
                        if seen.contains(&class[0]) || resident.support.contains(&t) {
                            continue;
                        }
                        seen.push(class[0]);
                        let a = analyze(build_branching_spec(params, &classes, &resident, t)?)?;
                        list.push(branching_json(space, &resident, &a, None));
                    }
                    Value::Array(list)
                }
            };
            write_json(io.out.as_deref(), &out)?;
            Ok(0)
        }
        Command::Pesp { io, seed, t_end, eps } => {
            let (model, classes) = load(&io.config)?;
            let params = &model.params;
            let space = params.space();
            let opts = PespOptions {
                eps,
                ..Default::default()
            };
            let support = model.initial_support();
            let x0 = DensityVector::restrict(space, &model.initial.densities(), &support);
            let state0 = settle(params, &classes, &x0, 0.0, &opts)?;
            let mut w = open_out(io.out.as_deref())?;
            let first = json!({
                "time": 0.0,
                "event": "initial",
                "support": state0.support.iter().map(|t| space.key(*t)).collect::<Vec<_>>(),
                "equilibrium": state0.equilibrium.values,
            });
            writeln!(w, "{}", serde_json::to_string(&first)?)?;
            let mut rng = seeded(seed);
            let mut write_err = None;
            let result = simulate_pesp(params, &classes, state0, t_end, &opts, &mut rng, |ev| {
                if write_err.is_none() {
                    let line = serde_json::to_string(&ev.to_json(space)).expect("event serializes");
                    if let Err(e) = writeln!(w, "{line}") {
                        write_err = Some(e);
                    }
                }
            });
            if let Some(e) = write_err {
                return Err(e.into());
            }
            w.flush()?;
            result?;
            Ok(0)
        }
        Command::McInvasion {
            io,
            mutant,
            replicates,
            seed,
            eps,
        } => {
            let (model, classes) = load(&io.config)?;
            let params = &model.params;
            let space = params.space();
            let m = parse_trait(params, &mutant)?;
            let cfg = McInvasionConfig {
                replicates,
                seed,
                eps,
                ..Default::default()
            };
            let r = mc_invasion(params, &classes, &model.initial, m, &cfg)?;
            let out = json!({
                "mutant": space.key(r.mutant),
                "resident": density_json(space, &r.resident_equilibrium),
                "K": params.carrying_capacity(),
                "eps": eps,
                "lambda_max": r.lambda_max,
                "analytic": r.analytic,
                "empirical": r.empirical,
                "successes": r.successes,
                "replicates": r.replicates,
                "undecided": r.undecided,
                "ci95": [r.ci95.0, r.ci95.1],
                "analytic_in_ci": r.analytic_in_ci(),
            });
            write_json(io.out.as_deref(), &out)?;
            Ok(0)
        }
    }
}

fn validate(io: &Io) -> Result<i32> {
    let model = Model::load(&io.config)?;
    let params = &model.params;
    let space = params.space();
    let report = validate_model(params);
    let mut non_recurrent = Vec::new();
    let mut genotypes = serde_json::Map::new();
    for (g, name) in space.genotypes().iter().enumerate() {
        let chain = build_switch_chain(params, g);
        let partition = communicating_classes(&chain);
        for ci in check_recurrence(&partition, &chain) {
            let class: Vec<&str> = partition.classes[ci].iter().map(|&p| space.phenotypes()[p].as_str()).collect();
            non_recurrent.push(json!({"genotype": name, "class": class}));
        }
        genotypes.insert(name.clone(), json!(partition.classes.len()));
    }
    let valid = report.is_valid() && non_recurrent.is_empty();
    let out = json!({
        "valid": valid,
        "violations": report.violations,
        "warnings": report.warnings,
        "non_recurrent_classes": non_recurrent,
        "class_count": genotypes,
    });
    write_json(io.out.as_deref(), &out)?;
    Ok(if valid { 0 } else { 2 })
}

fn classes(io: &Io) -> Result<i32> {
    let model = Model::load(&io.config)?;
    let params = &model.params;
    validate_model(params).into_result()?;
    let space = params.space();
    let mut out = serde_json::Map::new();
    for (g, name) in space.genotypes().iter().enumerate() {
        let chain = build_switch_chain(params, g);
        let partition = communicating_classes(&chain);
        let open = check_recurrence(&partition, &chain);
        let classes: Vec<Value> = partition
            .classes
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                json!({
                    "phenotypes": c.iter().map(|&p| space.phenotypes()[p].as_str()).collect::<Vec<_>>(),
                    "closed": !open.contains(&ci),
                })
            })
            .collect();
        out.insert(name.clone(), Value::Array(classes));
    }
    write_json(io.out.as_deref(), &Value::Object(out))?;
    Ok(0)
}

fn lvs(io: &Io, t_end: f64, sample_dt: f64, tol: f64, report_path: Option<&Path>, full: bool) -> Result<i32> {
    let (model, classes) = load(&io.config)?;
    let params = &model.params;
    let space = params.space();
    let times = sample_grid(t_end, sample_dt);
    let eq_opts = EquilibriumOptions {
        tol,
        ..Default::default()
    };
    let initial = model.initial.densities();
    let (rows, equilibrium): (Vec<Vec<f64>>, Result<EquilibriumReport>) = if full {
        let field = PlasticField::full(params);
        let traj = integrate(&field, &initial, 0.0, &times, &OdeOptions::default())?;
        let x0 = DensityVector::from_full(space, initial.clone());
        (traj.states, find_equilibrium(&field, &x0, &eq_opts))
    } else {
        let support = reachable_traits(space, &model.initial_support(), &classes)?;
        let field = PlasticField::lvs(params, &support, &classes)?;
        let x0 = DensityVector::restrict(space, &initial, &support);
        let traj = integrate(&field, &x0.values, 0.0, &times, &OdeOptions::default())?;
        let rows = traj
            .states
            .into_iter()
            .map(|s| DensityVector::new(support.clone(), s).to_full(space))
            .collect();
        (rows, find_equilibrium(&field, &x0, &eq_opts))
    };
    let mut w = open_out(io.out.as_deref())?;
    write_trajectory_csv(&mut w, space, &times, &rows, None)?;
    w.flush()?;

    let (report, failure) = match equilibrium {
        Ok(r) => (r, None),
        Err(Error::NonConvergence(r)) => {
            let e = Error::NonConvergence(r.clone());
            (*r, Some(e))
        }
        Err(e) => return Err(e),
    };
    let text = serde_json::to_string_pretty(&equilibrium_json(space, &report))? + "\n";
    let report_path = report_path.map(Path::to_path_buf).or_else(|| {
        io.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".equilibrium.json");
            PathBuf::from(s)
        })
    });
    match report_path {
        Some(p) => std::fs::write(p, text)?,
        None => eprint!("{text}"),
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

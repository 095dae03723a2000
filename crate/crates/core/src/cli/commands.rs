use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use phasekaczmarz::admissibility::{certify as certify_system, Budget};
use phasekaczmarz::analysis::{
    contraction_sweep, estimate_moment, run_drift_experiment, synthetic_init, DriftConfig,
    MomentKind,
};
use phasekaczmarz::io::{fmt_f64, load_vector, save_vector};
use phasekaczmarz::kaczmarz::{run, Mode, Observations, SolveConfig};
use phasekaczmarz::measurements::{
    generate_system, observe as observe_phaseless, observe_signed, Distribution, MeasurementSystem,
    PhaselessObservation, SignedObservation,
};
use phasekaczmarz::{sample_unit_sphere, SeededRng, Vector};

use super::args::*;
use super::{usage, Status};

const DEFAULT_SEED: u64 = 0;

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn load_system(path: &Path) -> Result<MeasurementSystem> {
    MeasurementSystem::load(path).with_context(|| format!("loading system {}", path.display()))
}

fn load_vec(path: &Path) -> Result<Vector> {
    load_vector(path).with_context(|| format!("loading vector {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to `out` if given, else to stdout.
fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// System from a file, or drawn from `d`, `m` with `rng`.
fn system_or_generate(
    path: Option<&PathBuf>,
    d: Option<usize>,
    m: Option<usize>,
    rng: &mut SeededRng,
) -> Result<MeasurementSystem> {
    match path {
        Some(p) => load_system(p),
        None => {
            let d = required(d, "d (or --system)")?;
            let m = required(m, "m (or --system)")?;
            generate_system(d, m, Distribution::UniformSphere, rng)
                .map_err(|e| usage(e.to_string()))
        }
    }
}

fn truth_or_sample(path: Option<&PathBuf>, d: usize, rng: &mut SeededRng) -> Result<Vector> {
    let x = match path {
        Some(p) => load_vec(p)?,
        None => sample_unit_sphere(d, rng)?,
    };
    if x.dim() != d {
        return Err(usage(format!(
            "truth has dimension {}, system has {d}",
            x.dim()
        )));
    }
    Ok(x)
}

pub fn gen(a: GenArgs) -> Result<Status> {
    let d = required(a.d, "d")?;
    let m = required(a.m, "m")?;
    let out = required(a.out, "out")?;
    let dist = match a.dist.unwrap_or(DistArg::Sphere) {
        DistArg::Sphere => Distribution::UniformSphere,
        DistArg::Gaussian => Distribution::GaussianNormalized,
    };
    let mut rng = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let system = generate_system(d, m, dist, &mut rng).map_err(|e| usage(e.to_string()))?;
    system
        .save(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("digest={:016x}", system.digest());
    Ok(Status::Ok)
}

pub fn observe(a: ObserveArgs) -> Result<Status> {
    let system = load_system(&required(a.system, "system")?)?;
    let x = load_vec(&required(a.truth, "truth")?)?;
    let out = required(a.out, "out")?;
    if a.signed {
        observe_signed(&system, &x)?.save(&out)
    } else {
        observe_phaseless(&system, &x)?.save(&out)
    }
    .with_context(|| format!("writing {}", out.display()))?;
    println!("m={} digest={:016x}", system.len(), system.digest());
    Ok(Status::Ok)
}

enum Data {
    Signed(SignedObservation),
    Phaseless(PhaselessObservation),
}

impl Data {
    fn values(&self) -> &[f64] {
        match self {
            Data::Signed(o) => o.values(),
            Data::Phaseless(o) => o.intensities(),
        }
    }

    fn as_obs(&self) -> Observations<'_> {
        match self {
            Data::Signed(o) => Observations::Signed(o),
            Data::Phaseless(o) => Observations::Phaseless(o),
        }
    }
}

pub fn solve(a: SolveArgs) -> Result<Status> {
    let system = load_system(&required(a.system, "system")?)?;
    let out = required(a.out, "out")?;
    let mode = match a.mode.unwrap_or(ModeArg::Phase) {
        ModeArg::Phase => Mode::Phase,
        ModeArg::Linear => Mode::Linear,
    };
    let truth = a.truth.as_ref().map(|p| load_vec(p)).transpose()?;
    if let Some(x) = &truth {
        if x.dim() != system.dim() {
            return Err(usage(format!(
                "truth has dimension {}, system has {}",
                x.dim(),
                system.dim()
            )));
        }
    }
    let data = match (&a.obs, &truth, mode) {
        (Some(p), _, Mode::Phase) => Data::Phaseless(
            PhaselessObservation::load(p)
                .with_context(|| format!("loading observations {}", p.display()))?,
        ),
        (Some(p), _, Mode::Linear) => Data::Signed(
            SignedObservation::load(p)
                .with_context(|| format!("loading observations {}", p.display()))?,
        ),
        (None, Some(x), Mode::Phase) => Data::Phaseless(observe_phaseless(&system, x)?),
        (None, Some(x), Mode::Linear) => Data::Signed(observe_signed(&system, x)?),
        (None, None, _) => return Err(usage("need --obs or --truth")),
    };

    let root = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let x0 = match (&a.x0, a.init_error, &truth) {
        (Some(_), Some(_), _) => return Err(usage("--x0 and --init-error are exclusive")),
        (Some(p), None, _) => load_vec(p)?,
        (None, Some(rel), Some(x)) => {
            if !(rel >= 0.0) || !rel.is_finite() {
                return Err(usage("--init-error must be a nonnegative number"));
            }
            synthetic_init(x, rel * x.norm(), &mut root.child(0))?
        }
        (None, Some(_), None) => return Err(usage("--init-error needs --truth")),
        (None, None, _) => {
            // Random direction at the norm implied by E <x, phi>^2 = ‖x‖^2 / d.
            let y = data.values();
            let mean_sq = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            let scale = (system.dim() as f64 * mean_sq).sqrt();
            sample_unit_sphere(system.dim(), &mut root.child(0))?.scaled(scale)
        }
    };

    let cfg = SolveConfig {
        max_steps: a.steps.unwrap_or(1000),
        seed: root.child(1).seed(),
        stop_tol: a.stop_tol,
        trace_every: a.trace_every.unwrap_or(1),
    };
    let trace = run(&system, data.as_obs(), &x0, &cfg, mode, truth.as_ref())?;
    trace
        .save_csv(&out)
        .with_context(|| format!("writing {}", out.display()))?;
    match trace.final_sq_error() {
        Some(e) => println!("steps={} final_sq_error={}", trace.steps_taken, fmt_f64(e)),
        None => println!("steps={}", trace.steps_taken),
    }
    if let Some(p) = &a.final_iterate {
        save_vector(p, &trace.final_iterate).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(Status::Ok)
}

pub fn certify(a: CertifyArgs) -> Result<Status> {
    let delta = required(a.delta, "delta")?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(usage(format!("--delta must lie in (0, 1), got {delta}")));
    }
    let system = load_system(&required(a.system, "system")?)?;
    let budget = Budget {
        n_pairs: a.n_pairs.unwrap_or(10_000),
        n_dirs: a.n_dirs.unwrap_or(10_000),
    };
    let rng = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let report = certify_system(&system, delta, budget, &rng)?;
    let mut json = report.to_json()?;
    json.push('\n');
    emit(a.out.as_ref(), &json)?;
    eprintln!(
        "tessellation={} second_moment={} trunc_fourth={} trunc_tail={} overall={}",
        report.cond_tessellation.passed,
        report.cond_second_moment.passed,
        report.cond_trunc_fourth.passed,
        report.cond_trunc_tail.passed,
        report.overall
    );
    Ok(if report.overall {
        Status::Ok
    } else {
        Status::Failed
    })
}

pub fn drift(a: DriftArgs) -> Result<Status> {
    let root = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let system = system_or_generate(a.system.as_ref(), a.d, a.m, &mut root.child(0))?;
    let x = truth_or_sample(a.truth.as_ref(), system.dim(), &mut root.child(1))?;
    let mut cfg = DriftConfig::new(
        system.dim(),
        a.delta.unwrap_or(0.1),
        a.eps.unwrap_or(0.3),
        a.n_trials.unwrap_or(500),
        root.child(2).seed(),
    );
    if let Some(k) = a.horizon {
        cfg.horizon = k;
    }
    if let Some(r) = a.record_every {
        cfg.record_every = r;
    }
    let report = run_drift_experiment(&system, &x, &cfg).map_err(|e| match e {
        phasekaczmarz::Error::InvalidParameter(msg) => usage(msg),
        other => other.into(),
    })?;
    if let Some(p) = &a.out {
        write_file(p, &(report.to_json()? + "\n"))?;
    }
    if let Some(p) = &a.curve {
        write_file(p, &report.to_csv())?;
    }
    println!(
        "escapes={}/{} bound={} decay_ok={}",
        report.escape_count,
        report.n_trials,
        fmt_f64(report.escape_bound),
        report.decay_ok()
    );
    Ok(Status::Ok)
}

pub fn sweep(a: SweepArgs) -> Result<Status> {
    let root = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let system = system_or_generate(a.system.as_ref(), a.d, a.m, &mut root.child(0))?;
    let x = truth_or_sample(a.truth.as_ref(), system.dim(), &mut root.child(1))?;
    let radii = a.radii.unwrap_or_else(|| vec![0.01]);
    let table = contraction_sweep(
        &system,
        &x,
        &radii,
        a.n_states.unwrap_or(200),
        &mut root.child(2),
    )
    .map_err(|e| match e {
        phasekaczmarz::Error::InvalidParameter(msg) => usage(msg),
        other => other.into(),
    })?;
    emit(a.out.as_ref(), &table.to_csv())?;
    Ok(Status::Ok)
}

pub fn moments(a: MomentsArgs) -> Result<Status> {
    let d = required(a.d, "d")?;
    let n = a.n.unwrap_or(100_000);
    if d == 0 {
        return Err(usage("--d must be positive"));
    }
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let root = SeededRng::new(a.seed.unwrap_or(DEFAULT_SEED));
    let z = Vector::basis(d, 0);
    let mut rows: Vec<(String, MomentKind)> = vec![
        ("second".into(), MomentKind::Second(z.clone())),
        ("fourth".into(), MomentKind::Fourth(z.clone())),
    ];
    if d >= 2 {
        for (label, theta) in [
            ("pi/6", PI / 6.0),
            ("pi/4", PI / 4.0),
            ("pi/2", PI / 2.0),
            ("3pi/4", 0.75 * PI),
        ] {
            let mut y = vec![0.0; d];
            y[0] = theta.cos();
            y[1] = theta.sin();
            rows.push((
                format!("mismatch theta={label}"),
                MomentKind::Mismatch(z.clone(), Vector::new(y)?),
            ));
        }
    }
    let mut text = String::from("quantity,closed_form,estimate,std_error,z_score\n");
    for (i, (label, kind)) in rows.iter().enumerate() {
        let exact = kind.exact()?;
        let est = estimate_moment(kind, n, &mut root.child(i as u64))?;
        let z_score = if est.std_error > 0.0 {
            (est.value - exact) / est.std_error
        } else {
            0.0
        };
        let _ = writeln!(
            text,
            "{label},{},{},{},{}",
            fmt_f64(exact),
            fmt_f64(est.value),
            fmt_f64(est.std_error),
            fmt_f64(z_score)
        );
    }
    emit(a.out.as_ref(), &text)?;
    Ok(Status::Ok)
}

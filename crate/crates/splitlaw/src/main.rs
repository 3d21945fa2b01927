//! Experiment runner: samplers, identity checks, and test suites as
//! subcommands over a TOML experiment configuration.
//!
//! Exit codes: 0 all checks in scope pass, 1 an identity or test failed,
//! 2 configuration or usage error.

use std::fs::{create_dir_all, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use splitlaw::config::{ExperimentConfig, ToleranceProfile};
use splitlaw::error::{Error, Result};
use splitlaw::exact::{
    enumerate_model, tv_joint_vs_product, tv_joints, tv_tables, campbell_chain,
};
use splitlaw::functionals::{
    campbell_estimate, laplace_estimate, mecke_residual, poisson_laplace_closed_form,
    CampbellTestFunction, EstimateWithError,
};
use splitlaw::intensity::Quadrature;
use splitlaw::measure::{PointMeasure, Region, Space};
use splitlaw::process::{ProcessModel, RngStream};
use splitlaw::report::{write_records, Record};
use splitlaw::stats::{factorization_test, multi_factorization_test, StderrMethod, TestFunctionBank, TupleBank};
use splitlaw::testfn::TestFunction;
use splitlaw::thinning::{multi_split, split, thin, RetentionVector};
use splitlaw::{io as pattern_io};

#[derive(Parser)]
#[command(
    name = "splitlaw",
    about = "Thinning/splitting experiments on point processes",
    version
)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of deterministic RNG streams pooled by estimation
    /// subcommands (overrides run.jobs). Identity batteries are
    /// single-stream.
    #[arg(long, global = true)]
    jobs: Option<u64>,

    /// Tolerance profile for exact-verify comparisons:
    /// exact, quadrature, or mc.
    #[arg(long, global = true)]
    tolerance_profile: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit sampled point patterns.
    Sample,
    /// Emit q-thinned patterns.
    Thin,
    /// Emit (retained, deleted) split pairs.
    Split,
    /// Emit n-way multi-split part vectors.
    MultiSplit,
    /// Estimate Laplace transforms over the test-function bank.
    Laplace,
    /// Estimate the Campbell functional against the closed-form first moment.
    Campbell,
    /// Mecke residuals against the model's first moment measure.
    Mecke,
    /// Exact identity battery on a discrete space.
    ExactVerify,
    /// Monte Carlo factorization test suite.
    FactorizationTest,
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn writer_for(out: &Option<PathBuf>, name: &str) -> Result<Box<dyn Write>> {
    match out {
        Some(dir) => {
            create_dir_all(dir)?;
            Ok(Box::new(BufWriter::new(File::create(dir.join(name))?)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

/// Split `n` across `jobs` RNG streams and pool the per-stream estimates
/// (weighted by stream sample counts). Stream order is fixed, so the result
/// is independent of any execution interleaving.
fn pooled(
    seed: u64,
    jobs: u64,
    n: usize,
    mut f: impl FnMut(&mut RngStream, usize) -> Result<EstimateWithError>,
) -> Result<EstimateWithError> {
    let jobs = jobs.min(n as u64).max(1);
    let base = n / jobs as usize;
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut total = 0usize;
    for stream_id in 0..jobs {
        let chunk = if stream_id == jobs - 1 { n - base * (jobs as usize - 1) } else { base };
        let mut rng = RngStream::new(seed, stream_id);
        let est = f(&mut rng, chunk)?;
        let w = chunk as f64 / n as f64;
        mean += w * est.value;
        var += w * w * est.stderr * est.stderr;
        total += chunk;
    }
    Ok(EstimateWithError { value: mean, stderr: var.sqrt(), n_samples: total })
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = ExperimentConfig::from_path(&cli.config)?;
    let seed = cli.seed.unwrap_or(cfg.run.seed);
    let jobs = cli.jobs.unwrap_or(cfg.run.jobs);
    if jobs == 0 {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    let profile = match &cli.tolerance_profile {
        Some(s) => Some(s.parse::<ToleranceProfile>()?),
        None => None,
    };
    let space = cfg.space()?;
    let model = cfg.model()?;
    let n = cfg.run.n_samples;
    let sigma = cfg.tolerances.mc_sigma;

    match cli.cmd {
        Cmd::Sample => {
            let mut w = writer_for(&cli.out, "patterns.txt")?;
            let mut rng = RngStream::new(seed, 0);
            for i in 0..n {
                writeln!(w, "# sample {i}")?;
                pattern_io::write_pattern(&mut w, &space, &model.sample(&mut rng)?)?;
            }
            w.flush()?;
            Ok(0)
        }
        Cmd::Thin => {
            let q = cfg.q()?;
            let mut w = writer_for(&cli.out, "thinned.txt")?;
            let mut rng = RngStream::new(seed, 0);
            for i in 0..n {
                let mu = model.sample(&mut rng)?;
                writeln!(w, "# sample {i}")?;
                pattern_io::write_pattern(&mut w, &space, &thin(&mu, q, &mut rng)?)?;
            }
            w.flush()?;
            Ok(0)
        }
        Cmd::Split => {
            let q = cfg.q()?;
            let mut w = writer_for(&cli.out, "splits.txt")?;
            let mut rng = RngStream::new(seed, 0);
            for i in 0..n {
                let mu = model.sample(&mut rng)?;
                let pair = split(&mu, q, &mut rng)?;
                writeln!(w, "# sample {i}")?;
                pattern_io::write_parts(&mut w, &space, &[pair.retained, pair.deleted])?;
            }
            w.flush()?;
            Ok(0)
        }
        Cmd::MultiSplit => {
            let rv = cfg.retention()?;
            let mut w = writer_for(&cli.out, "parts.txt")?;
            let mut rng = RngStream::new(seed, 0);
            for i in 0..n {
                let mu = model.sample(&mut rng)?;
                let sv = multi_split(&mu, &rv, &mut rng)?;
                writeln!(w, "# sample {i}")?;
                pattern_io::write_parts(&mut w, &space, &sv.parts)?;
            }
            w.flush()?;
            Ok(0)
        }
        Cmd::Laplace => {
            let bank = laplace_bank(&space);
            let mut records = Vec::new();
            let mut failed = false;
            for (name, f) in &bank {
                let est = pooled(seed, jobs, n, |rng, chunk| {
                    laplace_estimate(&model, f, chunk, rng)
                })?;
                let mut rec = Record::from_estimate("laplace", name, &est, seed, 0);
                rec.n_samples = Some(n);
                if let ProcessModel::Poisson(rho) = &model {
                    let exact =
                        poisson_laplace_closed_form(rho, f, Quadrature::default())?;
                    let pass = (est.value - exact).abs() <= sigma * est.stderr;
                    failed |= !pass;
                    rec.reject = Some(!pass);
                    rec.tolerance = Some(sigma);
                    records.push(rec);
                    records.push(Record::exact(
                        "laplace-closed-form",
                        name,
                        exact,
                        cfg.tolerances.exact,
                    ));
                } else {
                    records.push(rec);
                }
            }
            let mut w = writer_for(&cli.out, "laplace.jsonl")?;
            write_records(&mut w, &records)?;
            w.flush()?;
            Ok(if failed { 1 } else { 0 })
        }
        Cmd::Campbell => {
            let h = CampbellTestFunction::location_indicator(Region::All);
            let est = pooled(seed, jobs, n, |rng, chunk| {
                campbell_estimate(&model, &h, chunk, rng)
            })?;
            let expected = model.first_moment().total_mass();
            let pass = (est.value - expected).abs() <= sigma * est.stderr;
            let mut rec = Record::from_estimate("campbell", "total-count", &est, seed, 0);
            rec.reject = Some(!pass);
            rec.tolerance = Some(sigma);
            let records = vec![
                rec,
                Record::exact("campbell-closed-form", "total-count", expected, cfg.tolerances.exact),
            ];
            let mut w = writer_for(&cli.out, "campbell.jsonl")?;
            write_records(&mut w, &records)?;
            w.flush()?;
            Ok(if pass { 0 } else { 1 })
        }
        Cmd::Mecke => {
            let rho = model.first_moment();
            let suite = mecke_suite(&space);
            let mut records = Vec::new();
            let mut failed = false;
            for (name, h) in &suite {
                let est = pooled(seed, jobs, n, |rng, chunk| {
                    mecke_residual(&model, &rho, h, chunk, rng, 24)
                })?;
                let pass = est.value.abs() <= sigma * est.stderr;
                failed |= !pass;
                let mut rec = Record::from_estimate("mecke-residual", name, &est, seed, 0);
                rec.reject = Some(!pass);
                rec.tolerance = Some(sigma);
                records.push(rec);
            }
            let mut w = writer_for(&cli.out, "mecke.jsonl")?;
            write_records(&mut w, &records)?;
            w.flush()?;
            Ok(if failed { 1 } else { 0 })
        }
        Cmd::ExactVerify => exact_verify(cli, &cfg, &space, &model, profile),
        Cmd::FactorizationTest => {
            let method = StderrMethod::default();
            let win = match &space {
                Space::Window(w) => w.clone(),
                Space::Discrete { .. } => {
                    return Err(Error::Config(
                        "factorization-test requires a window space; use exact-verify on discrete spaces".into(),
                    ))
                }
            };
            let mut rng = RngStream::new(seed, 0);
            let rv = cfg.retention()?;
            let outcome = if rv.len() > 2 {
                let bank = TupleBank::default_for_window(&win, rv.len());
                multi_factorization_test(&model, &rv, &bank, n, &mut rng, method)?
            } else {
                let bank = TestFunctionBank::default_for_window(&win);
                factorization_test(&model, cfg.q()?, &bank, n, &mut rng, method)?
            };
            let records = Record::from_family("factorization-test", &outcome);
            let mut w = writer_for(&cli.out, "factorization.jsonl")?;
            write_records(&mut w, &records)?;
            w.flush()?;
            for r in &outcome.reports {
                eprintln!(
                    "{} {}: z = {:.3}",
                    if r.reject { "FAIL" } else { "pass" },
                    r.name,
                    r.z_score
                );
            }
            Ok(if outcome.family_reject { 1 } else { 0 })
        }
    }
}

fn laplace_bank(space: &Space) -> Vec<(String, TestFunction)> {
    match space {
        Space::Discrete { atoms } => {
            let ln2 = std::f64::consts::LN_2;
            let mut bank: Vec<(String, TestFunction)> = (0..*atoms)
                .map(|i| {
                    let mut values = vec![0.0; *atoms];
                    values[i] = ln2;
                    (format!("atom-{i}"), TestFunction::discrete(values))
                })
                .collect();
            bank.push(("uniform".to_string(), TestFunction::discrete(vec![ln2; *atoms])));
            bank
        }
        Space::Window(win) => TestFunctionBank::default_for_window(win)
            .pairs
            .into_iter()
            .map(|(name, f, _)| (name, f))
            .collect(),
    }
}

fn mecke_suite(space: &Space) -> Vec<(String, CampbellTestFunction)> {
    let region = match space {
        Space::Discrete { .. } => Region::atoms([0]),
        Space::Window(w) => {
            let mut upper = w.upper.clone();
            upper[0] = 0.5 * (w.lower[0] + w.upper[0]);
            Region::Box { lower: w.lower.clone(), upper }
        }
    };
    vec![
        ("constant".to_string(), CampbellTestFunction::new(1.0, |_, _| 1.0)),
        (
            "count-le-2".to_string(),
            CampbellTestFunction::new(1.0, |_, mu: &PointMeasure| {
                if mu.total_count() <= 2 { 1.0 } else { 0.0 }
            }),
        ),
        ("half-region".to_string(), CampbellTestFunction::location_indicator(region)),
        (
            "exp-count".to_string(),
            CampbellTestFunction::new(1.0, |_, mu: &PointMeasure| {
                (-(mu.total_count() as f64)).exp()
            }),
        ),
    ]
}

fn exact_verify(
    cli: &Cli,
    cfg: &ExperimentConfig,
    space: &Space,
    model: &ProcessModel,
    profile: Option<ToleranceProfile>,
) -> Result<i32> {
    let k = match space {
        Space::Discrete { atoms } => *atoms,
        Space::Window(_) => {
            return Err(Error::Config(
                "exact-verify requires a discrete space; use factorization-test on windows".into(),
            ))
        }
    };
    let q = cfg.q()?;
    let tol = profile.unwrap_or(ToleranceProfile::Quadrature).value(&cfg.tolerances);
    let table = enumerate_model(model, k, cfg.run.cap)?;
    let joint = table.splitting(q)?;
    let gamma_q = table.thin(q)?;
    let gamma_rest = table.thin(1.0 - q)?;

    let mut records = Vec::new();
    let mut push = |name: &str, distance: f64, threshold: f64| {
        let mut rec = Record::exact("exact-verify", name, distance, threshold);
        rec.reject = Some(distance > threshold);
        eprintln!(
            "{} {name}: distance = {distance:.3e} (threshold {threshold:.3e})",
            if distance > threshold { "FAIL" } else { "pass" }
        );
        records.push(rec);
    };

    // Universal identities: hold for every process, so a failure here is a
    // bug, not a property of the model.
    push(
        "thinning-marginal",
        tv_tables(&joint.marginal(0), &gamma_q)?.lattice,
        tol,
    );
    let rv2 = RetentionVector::new(vec![q, 1.0 - q])?;
    push(
        "two-way-multi-split",
        tv_joints(&joint, &table.multi_splitting(&rv2)?)?.lattice,
        tol,
    );
    let rv = cfg.retention()?;
    push(
        "sequential-vs-multinomial",
        tv_joints(
            &table.multi_splitting(&rv)?,
            &table.multi_splitting_sequential(&rv)?,
        )?
        .lattice,
        tol,
    );
    let mut karr_max = 0.0f64;
    let mut nu = vec![0u32; k];
    'nu: loop {
        if gamma_q.prob(&nu) > 0.0 {
            let kernel = table.karr_splitting_kernel(q, &nu)?;
            let direct = table.conditional_deleted(q, &nu)?;
            karr_max = karr_max.max(tv_tables(&kernel, &direct)?.lattice);
        }
        let mut j = 0;
        loop {
            if j == k {
                break 'nu;
            }
            nu[j] += 1;
            if nu[j] <= table.cap() {
                break;
            }
            nu[j] = 0;
            j += 1;
        }
    }
    push("karr-vs-conditional", karr_max, tol);

    let h = CampbellTestFunction::new(2.0, |x, mu: &PointMeasure| {
        let i = match x {
            splitlaw::measure::Location::Atom(i) => *i,
            _ => 0,
        };
        (i + 1) as f64 / (1.0 + mu.total_count() as f64)
    });
    let steps = campbell_chain(&table, q, &h)?;
    push("campbell-chain-universal", {
        let a = (steps[0] - steps[1]).abs();
        let b = (steps[1] - steps[2]).abs();
        a.max(b)
    }, tol);

    // Factorization-dependent identities: fail exactly when the model's
    // splitting law does not factorize. Truncation contributes at most the
    // table tail mass, which the thresholds absorb.
    let slack = table.tail_mass();
    let fact_tv = tv_joint_vs_product(&joint, &[gamma_q.clone(), gamma_rest.clone()])?;
    push("splitting-factorization", fact_tv.lattice, slack + tol);
    push(
        "campbell-chain-factorization",
        (steps[2] - steps[3]).abs(),
        100.0 * slack + tol,
    );

    let failed = records.iter().any(|r| r.reject == Some(true));
    let mut w = writer_for(&cli.out, "exact_verify.jsonl")?;
    write_records(&mut w, &records)?;
    w.flush()?;
    Ok(if failed { 1 } else { 0 })
}

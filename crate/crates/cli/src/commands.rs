//! The subcommands. Each turns resolved settings into named CSV tables.

use actinfo::absorption::decompose;
use actinfo::chains::AcceptanceRule;
use actinfo::deviations::{decay_slope, nonparam_rate};
use actinfo::inference::{ft_test, nonparam_actinfo, param_actinfo, two_sample_actinfo, EstimationResult, QEstimator};
use actinfo::info::actinfo as exact_actinfo;
use actinfo::io::{
    decay_row, equilibrium_row, estimation_row, time_row, write_table, DECAY_HEADER, ESTIMATION_HEADER, TIME_HEADER,
};
use actinfo::models::{
    build_machine, figure_equilibrium_sweep, figure_time_sweep, machine_labels, CosmologyModel, MachineModel, StudentModel,
};
use actinfo::sampling::{sample_iid, RandomSource};
use rayon::prelude::*;

use crate::config::{optional, param, Param, Settings};
use crate::error::CliError;

/// One output table, plus an optional plot script for it.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub table: String,
    pub plot: Option<String>,
}

pub struct Context<'a> {
    pub settings: &'a Settings,
    pub seed: Option<u64>,
    pub pool: &'a rayon::ThreadPool,
}

impl Context<'_> {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::config("seed", format!("{} is stochastic and needs a seed", self.settings.command())))
    }
}

pub struct Command {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
    pub run: fn(&Context) -> Result<Vec<Artifact>, CliError>,
}

const SWEEP_PARAMS: [Param; 4] = [
    param("d", "5", "number of machine parts"),
    param("theta-min", "0", "first theta of the grid"),
    param("theta-max", "10", "last theta of the grid"),
    param("theta-step", "0.1", "grid spacing"),
];

pub const COMMANDS: &[Command] = &[
    Command {
        name: "figure1",
        about: "Equilibrium active information against theta, b = 1",
        params: &[
            SWEEP_PARAMS[0],
            SWEEP_PARAMS[1],
            SWEEP_PARAMS[2],
            SWEEP_PARAMS[3],
            param("b", "1", "rate ratio of beneficial to deleterious mutations"),
            param("a-values", "-0.2,0,0.2", "specificity slopes, one curve each"),
        ],
        run: |cx| equilibrium_figure(cx, "fig1"),
    },
    Command {
        name: "figure2",
        about: "Equilibrium active information against theta, b = 0.5",
        params: &[
            SWEEP_PARAMS[0],
            SWEEP_PARAMS[1],
            SWEEP_PARAMS[2],
            SWEEP_PARAMS[3],
            param("b", "0.5", "rate ratio of beneficial to deleterious mutations"),
            param("a-values", "-0.2,0,0.2", "specificity slopes, one curve each"),
        ],
        run: |cx| equilibrium_figure(cx, "fig2"),
    },
    Command {
        name: "figure3",
        about: "Active information over time, with and without stopping",
        params: &[
            param("d", "5", "number of machine parts"),
            param("theta", "2.5", "tilting parameter"),
            param("t-max", "500", "last time step"),
            param("a-values", "-0.2,0.2", "specificity slopes"),
            param("b-values", "0.5,1", "rate ratios"),
        ],
        run: time_figure,
    },
    Command {
        name: "ldp-decay",
        about: "Exact significance level of the nonparametric test against sample size",
        params: &[
            param("p0a", "0.03125", "null probability of the target"),
            param("imin", "0.6931471805599453", "rejection threshold, nats"),
            param("n", "250,500,1000,2000,4000", "increasing sample sizes"),
        ],
        run: ldp_decay,
    },
    Command {
        name: "coverage",
        about: "Monte Carlo coverage of the 95% intervals on the machine model",
        params: &[
            param("d", "5", "number of machine parts"),
            param("a", "0.2", "specificity slope"),
            param("b", "1", "rate ratio"),
            param("theta", "1", "true tilting parameter"),
            param("n", "500", "sample size per replicate"),
            param("reps", "1000", "number of replicates"),
            optional("imin", "threshold for the fine-tuning test, nats"),
        ],
        run: coverage,
    },
    Command {
        name: "two-sample",
        about: "Two-sample estimates with the null rate ratio fitted from a null sample",
        params: &[
            param("d", "5", "number of machine parts"),
            param("a", "0", "specificity slope"),
            param("b", "0.5", "true rate ratio"),
            param("theta", "2.5", "true tilting parameter"),
            param("n", "10000", "size of the search sample"),
            param("n0", "10000", "size of the null sample"),
            optional("imin", "threshold for the fine-tuning test, nats"),
        ],
        run: two_sample,
    },
    Command {
        name: "cosmology",
        about: "Lower bound on active information for a life-permitting interval",
        params: &[param("x", "1", "interval midpoint"), param("eps", "0.001,0.01,0.1,0.9", "half relative widths")],
        run: cosmology,
    },
    Command {
        name: "student",
        about: "Active information of a learning period under the normal score model",
        params: &[
            param("mean", "0", "covariate means, comma separated"),
            param("cov", "1", "covariate covariance, row major"),
            param("xi", "0,1", "intercept and baseline slopes"),
            param("sigma2", "1", "residual variance"),
            param("theta", "1,0", "intercept and slope gains per unit time"),
            param("f0", "2", "pass mark"),
            param("t", "0,0.5,1,1.5,2", "study times"),
        ],
        run: student,
    },
    Command {
        name: "machine-info",
        about: "State table and summary quantities of one machine system",
        params: &[
            param("d", "5", "number of machine parts"),
            param("a", "0.2", "specificity slope"),
            param("b", "0.5", "rate ratio"),
            param("theta", "2.5", "tilting parameter"),
        ],
        run: machine_info,
    },
];

pub fn find(name: &str) -> Option<&'static Command> {
    COMMANDS.iter().find(|c| c.name == name)
}

fn table<I, R>(header: &[&str], rows: R) -> Result<String, CliError>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator,
    I::Item: AsRef<[u8]>,
{
    Ok(write_table(header, rows)?)
}

fn theta_grid(s: &Settings) -> Result<Vec<f64>, CliError> {
    let (lo, hi, step): (f64, f64, f64) = (s.get("theta-min")?, s.get("theta-max")?, s.get("theta-step")?);
    if !(step > 0.0) {
        return Err(CliError::config("theta-step", "must be positive"));
    }
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(CliError::config("theta-max", format!("need 0 <= theta-min <= theta-max, got [{lo}, {hi}]")));
    }
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=k).map(|j| lo + j as f64 * step).collect())
}

/// Settings keys holding the machine's `(d, a, b, theta)`, for error messages.
type MachineKeys = [&'static str; 4];
const MACHINE_KEYS: MachineKeys = ["d", "a", "b", "theta"];

fn machine_model(d: usize, a: f64, b: f64, theta: f64, keys: MachineKeys) -> Result<MachineModel, CliError> {
    MachineModel::new(d, a, b, theta).map_err(|e| {
        let key = if MachineModel::new(d, 0.0, 1.0, 0.0).is_err() {
            keys[0]
        } else if MachineModel::new(d, a, 1.0, 0.0).is_err() {
            keys[1]
        } else if MachineModel::new(d, a, b, 0.0).is_err() {
            keys[2]
        } else {
            keys[3]
        };
        CliError::config(key, e.to_string())
    })
}

fn equilibrium_figure(cx: &Context, stem: &str) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let (d, b): (usize, f64) = (s.get("d")?, s.get("b")?);
    let a_values: Vec<f64> = s.list("a-values")?;
    let grid = theta_grid(s)?;
    let models = a_values
        .iter()
        .map(|&a| machine_model(d, a, b, 0.0, ["d", "a-values", "b", "theta-min"]))
        .collect::<Result<Vec<_>, _>>()?;
    let curves =
        cx.pool.install(|| models.par_iter().map(|m| figure_equilibrium_sweep(m, &grid)).collect::<actinfo::Result<Vec<_>>>())?;
    let rows = a_values.iter().zip(&curves).flat_map(|(a, c)| {
        c.iter().map(move |r| {
            let [t, i, f] = equilibrium_row(r);
            [a.to_string(), t, i, f]
        })
    });
    let name = format!("{stem}.csv");
    let series: Vec<String> =
        a_values.iter().map(|a| format!("'{name}' using 2:($1=={a} ? $3 : 1/0) with lines title 'a = {a}'")).collect();
    let plot = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'theta'\nset ylabel 'I+ (nats)'\nplot {}, \\\n     '{name}' using 2:4 with lines dashtype 3 title 'I_f0'\n",
        series.join(", \\\n     ")
    );
    Ok(vec![Artifact { name, table: table(&["a", "theta", "iplus", "ifo"], rows)?, plot: Some(plot) }])
}

fn time_figure(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let (d, theta, t_max): (usize, f64, u64) = (s.get("d")?, s.get("theta")?, s.get("t-max")?);
    let a_values: Vec<f64> = s.list("a-values")?;
    let b_values: Vec<f64> = s.list("b-values")?;
    let mut panels = Vec::new();
    for &a in &a_values {
        for &b in &b_values {
            panels.push((a, b, machine_model(d, a, b, theta, ["d", "a-values", "b-values", "theta"])?));
        }
    }
    let sweeps = cx
        .pool
        .install(|| panels.par_iter().map(|(_, _, m)| figure_time_sweep(m, t_max)).collect::<actinfo::Result<Vec<_>>>())?;
    panels
        .iter()
        .zip(sweeps)
        .map(|((a, b, _), rows)| {
            let name = format!("fig3_a{a:+.1}_b{b:.1}.csv");
            let plot = format!(
                "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset ylabel 'I+ (nats)'\nset title 'a = {a}, b = {b}'\n\
                 plot '{name}' using 1:2 with lines dashtype 2 title 'I+(theta,t)', \\\n     \
                 '{name}' using 1:3 with lines title 'I_s+(theta,t)', \\\n     \
                 '{name}' using 1:5 with lines dashtype 3 title 'I_f0'\n"
            );
            Ok(Artifact { name, table: table(&TIME_HEADER, rows.iter().map(time_row))?, plot: Some(plot) })
        })
        .collect()
}

fn ldp_decay(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let (p0a, i_min): (f64, f64) = (s.get("p0a")?, s.get("imin")?);
    let ns: Vec<u64> = s.list("n")?;
    if !(p0a > 0.0 && p0a < 1.0) {
        return Err(CliError::config("p0a", "must lie in (0, 1)"));
    }
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config("n", "must be strictly increasing positive integers"));
    }
    let c = nonparam_rate(p0a, i_min, 0.0)?.rate;
    let rows = decay_slope(&ns, p0a, p0a * i_min.exp())?;
    let plot = "set datafile separator ','\nset key autotitle columnhead\nset logscale x\nset xlabel 'n'\nset ylabel '-log(level)/n'\n\
                plot 'ldp_decay.csv' using 1:3 with linespoints title 'exact', \\\n     'ldp_decay.csv' using 1:4 with lines title 'C'\n"
        .to_string();
    Ok(vec![Artifact {
        name: "ldp_decay.csv".into(),
        table: table(&DECAY_HEADER, rows.iter().map(|r| decay_row(r, c)))?,
        plot: Some(plot),
    }])
}

fn tested_row(r: &EstimationResult, i_min: Option<f64>, p0a: f64) -> [String; 9] {
    let test = i_min.map(|i| ft_test(r, i, p0a));
    estimation_row(r, test.as_ref())
}

fn coverage(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let seed = cx.seed()?;
    let (n, reps): (usize, u64) = (s.get("n")?, s.get("reps")?);
    if n == 0 {
        return Err(CliError::config("n", "must be positive"));
    }
    if reps == 0 {
        return Err(CliError::config("reps", "must be positive"));
    }
    let i_min: Option<f64> = s.opt("imin")?;
    let theta: f64 = s.get("theta")?;
    let model = machine_model(s.get("d")?, s.get("a")?, s.get("b")?, theta, MACHINE_KEYS)?;
    let sys = build_machine(&model)?;
    let q = sys.equilibrium();
    let truth = sys.family.actinfo_equilibrium(&sys.target, theta)?;
    let p0a = sys.null.mass()[model.size() - 1];
    let results = cx.pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|k| {
                let x = sample_iid(&q, n, &mut RandomSource::substream(seed, k));
                Ok([nonparam_actinfo(&x, &sys.target, p0a)?, param_actinfo(&x, &sys.family, &sys.target)?])
            })
            .collect::<actinfo::Result<Vec<_>>>()
    })?;

    let mut header = vec!["replicate"];
    header.extend(ESTIMATION_HEADER);
    header.extend(["theta_hat", "covers"]);
    let rows = results.iter().enumerate().flat_map(|(k, pair)| {
        pair.iter().map(move |r| {
            let mut row = vec![k.to_string()];
            row.extend(tested_row(r, i_min, p0a));
            row.push(r.theta_hat.map_or_else(String::new, |t| t.to_string()));
            row.push(r.covers(truth).to_string());
            row
        })
    });
    let per_rep = table(&header, rows)?;

    let summary_rows = (0..2).map(|j| {
        let hits = results.iter().filter(|p| p[j].covers(truth)).count();
        let finite: Vec<f64> = results.iter().map(|p| p[j].estimate).filter(|e| e.is_finite()).collect();
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        [
            results[0][j].kind.to_string(),
            truth.to_string(),
            reps.to_string(),
            (hits as f64 / reps as f64).to_string(),
            mean.to_string(),
            (reps as usize - finite.len()).to_string(),
        ]
    });
    let summary = table(&["estimator", "truth", "reps", "coverage", "mean_estimate", "degenerate"], summary_rows)?;
    Ok(vec![
        Artifact { name: "coverage.csv".into(), table: per_rep, plot: None },
        Artifact { name: "coverage_summary.csv".into(), table: summary, plot: None },
    ])
}

fn two_sample(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let seed = cx.seed()?;
    let (n, n0): (usize, usize) = (s.get("n")?, s.get("n0")?);
    if n == 0 || n0 == 0 {
        return Err(CliError::config(if n == 0 { "n" } else { "n0" }, "must be positive"));
    }
    let i_min: Option<f64> = s.opt("imin")?;
    let model = machine_model(s.get("d")?, s.get("a")?, s.get("b")?, s.get("theta")?, MACHINE_KEYS)?;
    let sys = build_machine(&model)?;
    let truth = exact_actinfo(&sys.equilibrium(), &sys.null, &sys.target)?;
    let x = sample_iid(&sys.equilibrium(), n, &mut RandomSource::substream(seed, 0));
    let x0 = sample_iid(&sys.null, n0, &mut RandomSource::substream(seed, 1));
    let fam = sys.parametric_family();
    let fam0 = sys.null_family();
    let estimates = [
        two_sample_actinfo(&x, &x0, &fam0, &sys.target, QEstimator::Nonparametric)?,
        two_sample_actinfo(&x, &x0, &fam0, &sys.target, QEstimator::Parametric(&fam))?,
    ];
    let p0a = sys.null.mass()[model.size() - 1];
    let mut header: Vec<&str> = ESTIMATION_HEADER.to_vec();
    header.extend(["xi_hat", "theta_hat", "truth"]);
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let rows = estimates.iter().map(|r| {
        let mut row: Vec<String> = tested_row(r, i_min, p0a).into();
        row.extend([opt(r.xi_hat), opt(r.theta_hat), truth.to_string()]);
        row
    });
    Ok(vec![Artifact { name: "two_sample.csv".into(), table: table(&header, rows)?, plot: None }])
}

fn cosmology(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let x: f64 = s.get("x")?;
    let eps: Vec<f64> = s.list("eps")?;
    let rows = eps
        .iter()
        .map(|&e| {
            let m = CosmologyModel::centered(x, e).map_err(|err| CliError::config("eps", err.to_string()))?;
            let b = m.actinfo_bound();
            Ok([
                m.a().to_string(),
                m.b().to_string(),
                b.epsilon.to_string(),
                b.xi_star.to_string(),
                b.p0max.to_string(),
                b.value.to_string(),
                b.approximation.to_string(),
                b.approximation_ok.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let header = ["a", "b", "epsilon", "xi_star", "p0max", "actinfo_bound", "approximation", "approximation_ok"];
    Ok(vec![Artifact { name: "cosmology.csv".into(), table: table(&header, rows)?, plot: None }])
}

fn student(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let model =
        StudentModel::new(s.list("mean")?, s.list("cov")?, s.list("xi")?, s.get("sigma2")?, s.list("theta")?, s.get("f0")?)
            .map_err(|e| {
                let key = match &e {
                    actinfo::Error::DegenerateVariance(_) => "sigma2",
                    actinfo::Error::InvalidModel(m) if m.starts_with("covariance") => "cov",
                    _ => "mean",
                };
                CliError::config(key, e.to_string())
            })?;
    let times: Vec<f64> = s.list("t")?;
    let rows = times
        .iter()
        .map(|&t| {
            Ok([
                t.to_string(),
                model.score_mean(t).to_string(),
                model.score_variance(t).to_string(),
                model.pass_probability(t)?.to_string(),
                model.actinfo(t)?.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let plot = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\nset ylabel 'I+ (nats)'\n\
                plot 'student.csv' using 1:5 with linespoints title 'I+(t)'\n"
        .to_string();
    Ok(vec![Artifact {
        name: "student.csv".into(),
        table: table(&["t", "score_mean", "score_variance", "pass_probability", "actinfo"], rows)?,
        plot: Some(plot),
    }])
}

fn machine_info(cx: &Context) -> Result<Vec<Artifact>, CliError> {
    let s = cx.settings;
    let model = machine_model(s.get("d")?, s.get("a")?, s.get("b")?, s.get("theta")?, MACHINE_KEYS)?;
    let sys = build_machine(&model)?;
    let eq = sys.equilibrium();
    let labels = machine_labels(model.d);
    let states = table(
        &["index", "label", "working_parts", "specificity", "null", "equilibrium"],
        (0..model.size()).map(|x| {
            [
                x.to_string(),
                labels[x].clone(),
                x.count_ones().to_string(),
                sys.spec.values()[x].to_string(),
                sys.null.mass()[x].to_string(),
                eq.mass()[x].to_string(),
            ]
        }),
    )?;
    let hitting =
        |rule| -> Result<f64, CliError> { Ok(decompose(&sys.kernel(rule)?, &sys.target, &sys.null)?.expected_hitting_time()?) };
    let summary = [
        ("null_target_probability", sys.null.mass()[model.size() - 1]),
        ("functional_information", sys.functional_information()),
        ("equilibrium_target_probability", eq.mass()[model.size() - 1]),
        ("equilibrium_actinfo", sys.family.actinfo_equilibrium(&sys.target, model.theta)?),
        ("expected_hitting_time_mh", hitting(AcceptanceRule::MetropolisHastings)?),
        ("expected_hitting_time_moran", hitting(AcceptanceRule::MoranSquareRoot)?),
    ];
    Ok(vec![
        Artifact { name: "machine_states.csv".into(), table: states, plot: None },
        Artifact {
            name: "machine_summary.csv".into(),
            table: table(&["quantity", "value"], summary.iter().map(|(k, v)| [k.to_string(), v.to_string()]))?,
            plot: None,
        },
    ])
}

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use speccon_core::canny::{thinned_gradient, DEFAULT_SIGMA};
use speccon_core::config::{parse_prefilter, parse_scales, ConfigFile, Method};
use speccon_core::eval::{
    default_tolerance, summarize_sweep, sweep_counts, thinned_sweep_counts, threshold_grid,
    DEFAULT_BETA,
};
use speccon_core::io::{
    ingest_dataset, read_edge_map, read_image, read_strength_map, write_edge_map, write_image,
    write_raw_map, write_strength_map,
};
use speccon_core::patch::DEFAULT_ALPHA;
use speccon_core::synth::MIN_SCENE_SIDE;
use speccon_core::{
    add_gaussian_noise, binarize, canny, fom, make_shapes, nms, prf, spectrum_congruency_map,
    EdgeStrengthMap, Error, Prefilter, ScaleSet,
};

use crate::error::CliError;
use crate::{BenchArgs, Cli, Command, DetectArgs, DetectorFlags, EvalCommand, SynthArgs, ThinArgs};

type CliResult<T> = Result<T, CliError>;

const DEFAULT_LOW: f64 = 0.1;
const DEFAULT_HIGH: f64 = 0.3;
const DEFAULT_THRESHOLDS: usize = 20;

pub(crate) fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let threads = match cli.threads {
        Some(n) => n,
        None => settings
            .config_value::<usize>("threads")?
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if threads == 0 {
        return Err(CliError::flag("threads", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Compute(e.to_string()))?;

    let (mut out_buf, mut err_buf) = (Vec::new(), Vec::new());
    let result = pool.install(|| {
        let (out, err) = (&mut out_buf, &mut err_buf);
        match cli.command {
            Command::Detect(args) => detect(&settings, args, err),
            Command::Thin(args) => thin(&settings, args),
            Command::Eval(cmd) => eval(&settings, cmd, out, err),
            Command::Synth(args) => synth(args),
            Command::Bench(args) => bench(&settings, args, out, err),
        }
    });
    out.write_all(&out_buf)?;
    err.write_all(&err_buf)?;
    result
}

/// Flag values backed by the optional config file.
struct Settings {
    config: ConfigFile,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let config = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                ConfigFile::parse(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        Ok(Settings { config })
    }

    fn config_value<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.config
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| {
                    CliError::Usage(format!("invalid value `{v}` for config key `{key}`: {e}"))
                })
            })
            .transpose()
    }

    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.config_value(key)?.unwrap_or(default)),
        }
    }

    fn pick_str(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.config.get(key).map(str::to_string))
    }

    fn method(&self, flags: &DetectorFlags) -> CliResult<Method> {
        match self.pick_str(flags.method.clone(), "method") {
            Some(m) => m.parse().map_err(|e| CliError::flag("method", e)),
            None => Ok(Method::default()),
        }
    }

    fn scales(&self, flags: &DetectorFlags) -> CliResult<ScaleSet> {
        let alpha = self.pick(flags.alpha, "alpha", DEFAULT_ALPHA)?;
        let sides = match self.pick_str(flags.scales.clone(), "scales") {
            Some(s) => parse_scales(&s).map_err(|e| CliError::flag("scales", e))?,
            None => ScaleSet::default().sides().to_vec(),
        };
        ScaleSet::new(sides, alpha).map_err(|e| match e {
            Error::InvalidParameter { name, .. } => CliError::flag(name, &e),
            other => other.into(),
        })
    }

    fn prefilter(&self, flags: &DetectorFlags) -> CliResult<Option<Prefilter>> {
        self.pick_str(flags.prefilter.clone(), "prefilter")
            .map(|p| parse_prefilter(&p).map_err(|e| CliError::flag("prefilter", e)))
            .transpose()
    }

    fn sigma(&self, flags: &DetectorFlags) -> CliResult<f64> {
        let sigma = self.pick(flags.sigma, "sigma", DEFAULT_SIGMA)?;
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(CliError::flag(
                "sigma",
                format!("must be positive, got {sigma}"),
            ));
        }
        Ok(sigma)
    }

    fn thresholds(&self, low: Option<f64>, high: Option<f64>) -> CliResult<(f64, f64)> {
        let low = self.pick(low, "low", DEFAULT_LOW)?;
        let high = self.pick(high, "high", DEFAULT_HIGH)?;
        if !(0.0..=1.0).contains(&low) {
            return Err(CliError::flag("low", format!("{low} is outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&high) {
            return Err(CliError::flag("high", format!("{high} is outside [0, 1]")));
        }
        if low > high {
            return Err(CliError::flag(
                "low",
                format!("{low} exceeds --high {high}"),
            ));
        }
        Ok((low, high))
    }
}

/// Prefixes I/O failures with the file involved.
fn at<T>(path: &Path, r: speccon_core::Result<T>) -> CliResult<T> {
    let shown = path.display().to_string();
    r.map_err(|e| match CliError::from(e) {
        CliError::Io(m) if !m.contains(&shown) => CliError::Io(format!("{shown}: {m}")),
        other => other,
    })
}

fn warn_gaps(scales: &ScaleSet, err: &mut dyn Write) {
    for w in scales.gap_warnings() {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn strength_map(
    img: &speccon_core::Image,
    scales: &ScaleSet,
    prefilter: Option<Prefilter>,
) -> CliResult<EdgeStrengthMap> {
    spectrum_congruency_map(img, scales, prefilter).map_err(|e| CliError::Compute(e.to_string()))
}

fn detect(settings: &Settings, args: DetectArgs, err: &mut dyn Write) -> CliResult<()> {
    match settings.method(&args.detector)? {
        Method::Sc => {
            let scales = settings.scales(&args.detector)?;
            let prefilter = settings.prefilter(&args.detector)?;
            warn_gaps(&scales, err);
            let img = at(&args.input, read_image(&args.input))?;
            let map = strength_map(&img, &scales, prefilter)?;
            at(&args.output, write_strength_map(&args.output, &map))?;
            if let Some(raw) = &args.raw {
                at(raw, write_raw_map(raw, &map))?;
            }
        }
        Method::Canny => {
            if args.raw.is_some() {
                return Err(CliError::flag("raw", "only available with --method sc"));
            }
            let sigma = settings.sigma(&args.detector)?;
            let (low, high) = settings.thresholds(args.low, args.high)?;
            let img = at(&args.input, read_image(&args.input))?;
            let edges =
                canny(&img, sigma, low, high).map_err(|e| CliError::Compute(e.to_string()))?;
            at(&args.output, write_edge_map(&args.output, &edges))?;
        }
    }
    Ok(())
}

fn thin(settings: &Settings, args: ThinArgs) -> CliResult<()> {
    let (low, high) = settings.thresholds(args.low, args.high)?;
    // Out-of-range samples mean the file is not a strength map.
    let map = match read_strength_map(&args.input) {
        Err(e @ Error::InvalidParameter { .. }) => {
            Err(CliError::Io(format!("{}: {e}", args.input.display())))
        }
        other => at(&args.input, other),
    }?;
    let thinned = nms(&map)?;
    at(
        &args.output,
        write_edge_map(&args.output, &binarize(&thinned, low, high)?),
    )?;
    Ok(())
}

fn eval(
    settings: &Settings,
    cmd: EvalCommand,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    match cmd {
        EvalCommand::Fom { det, gt, beta } => {
            let beta = settings.pick(beta, "beta", DEFAULT_BETA)?;
            if !beta.is_finite() || beta <= 0.0 {
                return Err(CliError::flag(
                    "beta",
                    format!("must be positive, got {beta}"),
                ));
            }
            let (det, gt) = (at(&det, read_edge_map(&det))?, at(&gt, read_edge_map(&gt))?);
            writeln!(out, "fom={:.6}", fom(&det, &gt, beta)?)?;
        }
        EvalCommand::Prf { det, gt, tol } => {
            let tol = tolerance(settings, tol)?;
            let (det, gt) = (at(&det, read_edge_map(&det))?, at(&gt, read_edge_map(&gt))?);
            let tol = tol.unwrap_or_else(|| default_tolerance(gt.width(), gt.height()));
            let r = prf(&det, &gt, tol)?;
            writeln!(
                out,
                "precision={:.6} recall={:.6} f={:.6}",
                r.precision, r.recall, r.f
            )?;
        }
        EvalCommand::Curve {
            dataset,
            thresholds,
            out: csv,
            tol,
            detector,
        } => {
            let n = settings.pick(thresholds, "thresholds", DEFAULT_THRESHOLDS)?;
            if n < 2 {
                return Err(CliError::flag(
                    "thresholds",
                    format!("need at least 2, got {n}"),
                ));
            }
            let tol = tolerance(settings, tol)?;
            let method = settings.method(&detector)?;
            let (scales, prefilter, sigma) = match method {
                Method::Sc => (
                    Some(settings.scales(&detector)?),
                    settings.prefilter(&detector)?,
                    None,
                ),
                Method::Canny => (None, None, Some(settings.sigma(&detector)?)),
            };
            let data = ingest_dataset(&dataset).map_err(|e| CliError::Io(e.to_string()))?;
            for w in &data.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let grid = threshold_grid(n);
            let mut counts = Vec::with_capacity(data.entries.len());
            for entry in &data.entries {
                let (img, gt) = entry.load()?;
                let tol = tol.unwrap_or_else(|| default_tolerance(gt.width(), gt.height()));
                let per_image = match (&scales, sigma) {
                    (Some(s), _) => {
                        sweep_counts(&strength_map(&img, s, prefilter)?, &gt, &grid, tol)?
                    }
                    (None, Some(sg)) => {
                        let thinned = EdgeStrengthMap::new(thinned_gradient(&img, sg)?)?;
                        thinned_sweep_counts(&thinned, &gt, &grid, tol)?
                    }
                    (None, None) => unreachable!("a detector is always selected"),
                };
                counts.push(per_image);
            }
            let curve = summarize_sweep(&grid, &counts);
            fs::write(&csv, curve.to_csv())
                .map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
            writeln!(
                out,
                "ods={:.6} ois={:.6} r50={:.6}",
                curve.f_ods, curve.f_ois, curve.r50
            )?;
        }
    }
    Ok(())
}

fn tolerance(settings: &Settings, flag: Option<f64>) -> CliResult<Option<f64>> {
    let tol = match flag {
        Some(t) => Some(t),
        None => settings.config_value::<f64>("tol")?,
    };
    if let Some(t) = tol {
        if !t.is_finite() || t < 0.0 {
            return Err(CliError::flag(
                "tol",
                format!("must be non-negative, got {t}"),
            ));
        }
    }
    Ok(tol)
}

fn synth(args: SynthArgs) -> CliResult<()> {
    if args.width < MIN_SCENE_SIDE {
        return Err(CliError::flag(
            "width",
            format!("must be at least {MIN_SCENE_SIDE}"),
        ));
    }
    if args.height < MIN_SCENE_SIDE {
        return Err(CliError::flag(
            "height",
            format!("must be at least {MIN_SCENE_SIDE}"),
        ));
    }
    if !args.sigma.is_finite() || args.sigma < 0.0 {
        return Err(CliError::flag(
            "sigma",
            format!("must be non-negative, got {}", args.sigma),
        ));
    }
    let scene = make_shapes(args.width, args.height)?;
    let noisy = add_gaussian_noise(&scene.image, args.sigma, args.seed)?;
    at(&args.out, write_image(&args.out, &noisy))?;
    at(&args.gt, write_edge_map(&args.gt, &scene.gt))?;
    Ok(())
}

fn bench(
    settings: &Settings,
    args: BenchArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    if args.iters == 0 {
        return Err(CliError::flag("iters", "must be at least 1"));
    }
    let scales = settings.scales(&args.detector)?;
    let prefilter = settings.prefilter(&args.detector)?;
    warn_gaps(&scales, err);
    let img = at(&args.input, read_image(&args.input))?;
    let mut total = 0.0;
    for i in 0..args.iters {
        let start = Instant::now();
        strength_map(&img, &scales, prefilter)?;
        let secs = start.elapsed().as_secs_f64();
        total += secs;
        writeln!(out, "iter {}: {:.3} ms", i + 1, secs * 1e3)?;
    }
    let mean = total / args.iters as f64;
    writeln!(out, "mean: {:.3} ms", mean * 1e3)?;
    writeln!(out, "throughput: {:.0} pixels/s", img.len() as f64 / mean)?;
    Ok(())
}

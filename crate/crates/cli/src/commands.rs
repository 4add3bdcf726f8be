use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use qmit::baselines::{ibu, mim, IbuConfig};
use qmit::calibration::{calibrate_model, CalibrationLine};
use qmit::metrics::{render_table, TableStyle};
use qmit::simulator::{sample_calibration, sample_shots, DetectorSpec, ExperimentSpec, Preparation};
use qmit::tally::{read_shots, tally_weighted, write_shots};
use qmit::{mitigate, BitString, NoiseModel, OutcomeTally, ResultFile};

use crate::manifest::{self, RunRecord};
use crate::{
    CalibrateArgs, Command, CompareArgs, Failure, Method, MitigateArgs, ReportArgs, SimulateArgs,
};

pub(crate) fn run(cmd: &Command, argv: &[String]) -> Result<(), Failure> {
    if let Command::Replay(args) = cmd {
        let mut recorded = manifest::load(&args.manifest)?;
        if let Some(out) = &args.out {
            match recorded.primary_output_mut() {
                Some(slot) => *slot = out.clone(),
                None => return Err(Failure::usage("recorded command has no output to redirect")),
            }
        }
        return run(&recorded, argv);
    }
    let started = Instant::now();
    let record = match cmd {
        Command::Calibrate(a) => calibrate(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::Mitigate(a) => run_mitigate(a)?,
        Command::Compare(a) => compare(a)?,
        Command::Report(a) => report(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    manifest::write(cmd, &record, started.elapsed(), argv)
}

impl Command {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Command::Calibrate(_) => "calibrate",
            Command::Simulate(_) => "simulate",
            Command::Mitigate(_) => "mitigate",
            Command::Compare(_) => "compare",
            Command::Report(_) => "report",
            Command::Replay(_) => "replay",
        }
    }

    fn primary_output_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Calibrate(a) => Some(&mut a.out),
            Command::Simulate(a) => Some(&mut a.out),
            Command::Mitigate(a) => Some(&mut a.out),
            Command::Compare(a) => Some(&mut a.out),
            Command::Report(a) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path, e))
}

fn read_string(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_string(path)?).map_err(|e| Failure {
        kind: "json",
        message: format!("{}: {e}", path.display()),
        code: 1,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn load_model(path: &Path) -> Result<NoiseModel, Failure> {
    Ok(NoiseModel::from_json(&read_string(path)?)?)
}

fn load_tally(path: &Path, model: &NoiseModel) -> Result<OutcomeTally, Failure> {
    let shots = read_shots(open(path)?)?;
    Ok(tally_weighted(shots.iter().map(|(s, c)| (s, *c)), model)?)
}

fn calibrate(a: &CalibrateArgs) -> Result<RunRecord, Failure> {
    let binary = a.mode == crate::ModeArg::Binary;
    let mut records = Vec::new();
    for (n, line) in open(&a.input)?.lines().enumerate() {
        let line = line.map_err(|e| Failure::io(&a.input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CalibrationLine = serde_json::from_str(&line).map_err(|e| Failure {
            kind: "json",
            message: format!("{} line {}: {e}", a.input.display(), n + 1),
            code: 1,
        })?;
        records.push(parsed.into_record(binary)?);
    }
    let model = calibrate_model(records, a.mode.into(), a.n_bin)?;
    write_file(&a.out, &model.to_json()?)?;
    Ok(RunRecord::new(vec![a.input.clone()], a.out.clone(), None))
}

fn simulate(a: &SimulateArgs) -> Result<RunRecord, Failure> {
    let spec: ExperimentSpec = read_json(&a.spec)?;
    let det: DetectorSpec = read_json(&a.detector_spec)?;
    det.validate()?;
    let file = File::create(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    let mut w = BufWriter::new(file);
    if spec.preparation == Preparation::Calibration {
        for rec in sample_calibration(&det, spec.n_shots, spec.seed, spec.mode)? {
            serde_json::to_writer(&mut w, &CalibrationLine::from(&rec)).map_err(qmit::Error::from)?;
            w.write_all(b"\n").map_err(|e| Failure::io(&a.out, e))?;
        }
    } else {
        write_shots(&mut w, &sample_shots(&spec, &det)?)?;
    }
    w.flush().map_err(|e| Failure::io(&a.out, e))?;
    Ok(RunRecord::new(
        vec![a.spec.clone(), a.detector_spec.clone()],
        a.out.clone(),
        Some(spec.seed),
    ))
}

fn run_mitigate(a: &MitigateArgs) -> Result<RunRecord, Failure> {
    let cfg = a.config();
    cfg.validate()?;
    let model = load_model(&a.detector)?;
    let tally = load_tally(&a.shots, &model)?;
    let result = mitigate(&tally, &model, &cfg)?;
    let doc = serde_json::to_string_pretty(&result.to_file(&cfg)).map_err(qmit::Error::from)?;
    write_file(&a.out, &doc)?;
    Ok(RunRecord::new(vec![a.detector.clone(), a.shots.clone()], a.out.clone(), None))
}

fn compare(a: &CompareArgs) -> Result<RunRecord, Failure> {
    let model = load_model(&a.detector)?;
    let tally = load_tally(&a.shots, &model)?;
    let target: BitString = a.target.parse()?;
    if target.len() != model.n_qubits() {
        return Err(Failure::usage(format!(
            "target has {} qubits, detector has {}",
            target.len(),
            model.n_qubits()
        )));
    }
    // The baselines work on assigned bits; analog data is thresholded.
    let binary_model = model.to_binary();
    let binary_tally = tally.to_binary();
    let mut rows = Vec::new();
    for &method in &a.methods {
        let start = Instant::now();
        let pops = match method {
            Method::Bayes => {
                let cfg = qmit::MitigationConfig {
                    n_p: a.n_p,
                    ..Default::default()
                };
                mitigate(&tally, &model, &cfg)?.populations
            }
            Method::Ibu => {
                let cfg = IbuConfig {
                    iterations: a.ibu_iterations,
                    ..Default::default()
                };
                ibu(&binary_tally, &binary_model, &cfg)?
            }
            Method::Mim => mim(&binary_tally, &binary_model)?,
        };
        let seconds = start.elapsed().as_secs_f64();
        let success = qmit::simulator::success_probability(&pops, &target);
        let name = match method {
            Method::Bayes => "bayes",
            Method::Ibu => "ibu",
            Method::Mim => "mim",
        };
        rows.push(vec![name.to_string(), format!("{success}"), format!("{seconds:.6}")]);
    }
    write_file(&a.out, &render_table(&["method", "success", "seconds"], &rows, TableStyle::Csv))?;
    Ok(RunRecord::new(vec![a.detector.clone(), a.shots.clone()], a.out.clone(), None))
}

fn report(a: &ReportArgs) -> Result<RunRecord, Failure> {
    let style = if a.gnuplot { TableStyle::Gnuplot } else { TableStyle::Csv };
    let (input, table) = match (&a.input.result, &a.input.table) {
        (Some(path), _) => {
            let result: ResultFile = read_json(path)?;
            let rows: Vec<Vec<String>> = result
                .tv_trace
                .iter()
                .enumerate()
                .map(|(k, tv)| vec![(k + 1).to_string(), format!("{tv:e}")])
                .collect();
            (path.clone(), render_table(&["sweep", "tv"], &rows, style))
        }
        (None, Some(path)) => {
            let text = read_string(path)?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let header: Vec<&str> = lines
                .next()
                .ok_or_else(|| Failure::usage(format!("{} is empty", path.display())))?
                .split(',')
                .collect();
            let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
            if rows.iter().any(|r| r.len() != header.len()) {
                return Err(Failure::usage(format!("{}: ragged table", path.display())));
            }
            (path.clone(), render_table(&header, &rows, style))
        }
        (None, None) => return Err(Failure::usage("report needs --result or --table")),
    };
    write_file(&a.out, &table)?;
    Ok(RunRecord::new(vec![input], a.out.clone(), None))
}

//! Training runs on disk: config copy, risk trace and checkpoints.

use std::io::Write;
use std::path::Path;

use super::{HarnessError, RunConfig};
use crate::losses::{input_dim, roles, FieldNet, Method, NetSet};
use crate::network::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::physics::ProblemSpec;
use crate::training::{train, TrainError, TrainEvent, TraceRow};

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "risk_trace.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_risk: f64,
    pub trace: Vec<TraceRow>,
}

/// Writes one `<role>.ckpt` per network into `dir`.
pub fn save_nets(dir: &Path, nets: &NetSet, seed: u64, iteration: usize) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    for f in &nets.fields {
        let ck = Checkpoint { role: f.role.name().to_string(), wrapper: f.wrapper, seed, iteration, net: f.net.clone() };
        write_checkpoint(&dir.join(format!("{}.ckpt", f.role.name())), &ck)?;
    }
    Ok(())
}

/// Reads the networks of `method` on `spec` written by [`save_nets`].
pub fn load_nets(dir: &Path, method: Method, spec: &ProblemSpec) -> Result<NetSet, HarnessError> {
    let fields = roles(method, spec)
        .into_iter()
        .map(|role| {
            let ck = read_checkpoint(&dir.join(format!("{}.ckpt", role.name())))?;
            if ck.role != role.name() || ck.net.shape().input_dim != input_dim(role, spec) {
                return Err(HarnessError::Config(format!(
                    "checkpoint for {} does not match the problem (role {}, input {})",
                    role.name(),
                    ck.role,
                    ck.net.shape().input_dim
                )));
            }
            Ok(FieldNet { role, wrapper: ck.wrapper, net: ck.net })
        })
        .collect::<Result<_, _>>()?;
    Ok(NetSet { fields })
}

/// Trains as configured, writing `config.json`, `risk_trace.csv`, final
/// checkpoints and any periodic ones under `checkpoints/iter_<n>/`. On a
/// non-finite abort the last finite parameters go to `last_good/`.
pub fn run_training(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CONFIG_FILE), cfg.to_json())?;
    let spec = cfg.spec();
    let mut nets = cfg.init_nets()?;
    let mut trace_out = std::io::BufWriter::new(std::fs::File::create(dir.join(TRACE_FILE))?);
    writeln!(trace_out, "{}", TraceRow::CSV_HEADER)?;
    let mut io_error: Option<HarnessError> = None;
    let seed = cfg.train.seed;
    let result = train(&spec, cfg.method, &mut nets, &cfg.train, |ev| {
        let r = match ev {
            TrainEvent::Trace(row) => writeln!(trace_out, "{}", row.csv()).map_err(HarnessError::from),
            TrainEvent::Checkpoint { iteration, nets } => {
                save_nets(&dir.join("checkpoints").join(format!("iter_{iteration}")), nets, seed, iteration)
            }
        };
        if let (Err(e), None) = (r, &io_error) {
            io_error = Some(e);
        }
    });
    trace_out.flush()?;
    if let Some(e) = io_error {
        return Err(e);
    }
    match result {
        Ok(outcome) => {
            save_nets(dir, &nets, seed, cfg.train.iterations)?;
            Ok(RunSummary { final_risk: outcome.final_risk, trace: outcome.trace })
        }
        Err(TrainError::NonFinite { iteration, groups, last_good }) => {
            save_nets(&dir.join("last_good"), &last_good, seed, iteration)?;
            Err(HarnessError::Train(TrainError::NonFinite { iteration, groups, last_good }))
        }
        Err(e) => Err(e.into()),
    }
}

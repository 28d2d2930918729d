//! `weights init|inspect|verify`.

use std::path::PathBuf;

use clap::Subcommand;
use mbci_core::model::{Architecture, ModelWeights, WEIGHTS_MANIFEST};

use crate::{user, CliError, Outcome};

#[derive(Clone, Debug, Subcommand)]
pub enum WeightsCommand {
    /// Write a randomly initialized container for the default architecture.
    Init {
        /// Container directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace an existing container.
        #[arg(long)]
        force: bool,
    },
    /// Print the tensor table and activation shapes.
    Inspect { dir: PathBuf },
    /// Check format, shapes, values and the blob checksum.
    Verify { dir: PathBuf },
}

fn load(dir: &PathBuf) -> Result<ModelWeights, CliError> {
    ModelWeights::load(dir).map_err(|e| user(format!("{}: {e}", dir.display())))
}

fn dims(d: &[usize]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("x")
}

pub fn weights(cmd: WeightsCommand) -> Result<Outcome, CliError> {
    match cmd {
        WeightsCommand::Init { out, seed, force } => {
            if out.join(WEIGHTS_MANIFEST).exists() && !force {
                return Err(user(format!("{} already holds a container; pass --force to replace it", out.display())));
            }
            let w = ModelWeights::init_random(Architecture::default(), seed)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            w.save(&out).map_err(|e| CliError::Internal(format!("{}: {e}", out.display())))?;
            Ok(Outcome {
                summary: format!("{} parameters, seed {seed}", w.parameter_count()),
                result: Some(out),
            })
        }
        WeightsCommand::Inspect { dir } => {
            let w = load(&dir)?;
            let mut s = format!(
                "classes {}, batch-norm epsilon {}, {} parameters\n\n{:<28} {:>14} {:>10}\n",
                w.classes.join("/"),
                w.batch_norm_epsilon,
                w.parameter_count(),
                "tensor",
                "shape",
                "params"
            );
            for t in w.tensors() {
                s.push_str(&format!("{:<28} {:>14} {:>10}\n", t.name, dims(&t.shape), t.data.len()));
            }
            s.push_str(&format!("\n{:<28} {:>14}\n", "layer", "output"));
            for l in w.architecture.shape_trace() {
                s.push_str(&format!("{:<28} {:>14}\n", l.layer, dims(&l.dims)));
            }
            Ok(Outcome {
                summary: s,
                result: None,
            })
        }
        WeightsCommand::Verify { dir } => {
            let w = load(&dir)?;
            Ok(Outcome {
                summary: format!(
                    "ok: {} tensors, {} parameters, checksum and shapes match",
                    w.tensors().len(),
                    w.parameter_count()
                ),
                result: Some(dir),
            })
        }
    }
}

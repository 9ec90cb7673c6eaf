use std::fs::{self, File};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{Block, Predictor};
use crate::data::{write_rows, write_schema_file, FeatureSchema};
use crate::error::{Error, PredictorError, Result};

const POLL: Duration = Duration::from_millis(5);

/// Runs an external program once per step over the file protocol:
///
/// ```text
/// <program> [args…] --train <path> --test <path> --schema <path> --pred-out <path>
///           --remaining-budget <seconds> --step <k> --workdir <path>
/// ```
///
/// The train file holds the newly revealed block with its labels, the test
/// file the block to score. The program writes one score per line to the
/// predictions file and exits 0. `--workdir` persists across steps so the
/// program can keep its own history. A program still running when the
/// remaining budget expires is killed along with its process group.
#[derive(Debug)]
pub struct SubprocessPredictor {
    id: String,
    program: PathBuf,
    args: Vec<String>,
    exchange: PathBuf,
    state: PathBuf,
    learned: bool,
    overhead: Duration,
}

impl SubprocessPredictor {
    /// Protocol files go to `<workdir>/exchange`; the program's own state
    /// directory is `<workdir>/state`.
    pub fn new(id: impl Into<String>, program: impl Into<PathBuf>, workdir: impl AsRef<Path>) -> Result<Self> {
        let workdir = workdir.as_ref();
        let exchange = workdir.join("exchange");
        let state = workdir.join("state");
        for dir in [&exchange, &state] {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(Self {
            id: id.into(),
            program: program.into(),
            args: Vec::new(),
            exchange,
            state,
            learned: false,
            overhead: Duration::ZERO,
        })
    }

    /// Arguments placed before the protocol arguments.
    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn state_dir(&self) -> &Path {
        &self.state
    }

    fn path(&self, name: &str) -> PathBuf {
        self.exchange.join(name)
    }

    fn timed_io<T>(&mut self, f: impl FnOnce(&Self) -> Result<T>) -> Result<T, PredictorError> {
        let start = Instant::now();
        let out = f(self).map_err(|e| PredictorError::Failed(format!("protocol i/o: {e}")));
        self.overhead += start.elapsed();
        out
    }

    fn run(&self, step: usize, remaining: Duration) -> Result<(), PredictorError> {
        let stderr_path = self.path("stderr.txt");
        let stderr = File::create(&stderr_path).map_err(|e| PredictorError::Failed(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg("--train")
            .arg(self.path("train.csv"))
            .arg("--test")
            .arg(self.path("test.csv"))
            .arg("--schema")
            .arg(self.path("schema.csv"))
            .arg("--pred-out")
            .arg(self.path("predictions.txt"))
            .arg("--remaining-budget")
            .arg(format!("{:.3}", remaining.as_secs_f64()))
            .arg("--step")
            .arg(step.to_string())
            .arg("--workdir")
            .arg(&self.state)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(stderr)
            .process_group(0)
            .spawn()
            .map_err(|e| PredictorError::Failed(format!("cannot start {}: {e}", self.program.display())))?;

        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() >= remaining => {
                    // SAFETY: the child leads its own process group, so this
                    // signals only the predictor and its descendants.
                    unsafe {
                        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
                    }
                    let _ = child.wait();
                    return Err(PredictorError::Timeout);
                }
                Ok(None) => thread::sleep(POLL),
                Err(e) => return Err(PredictorError::Failed(e.to_string())),
            }
        };
        if status.success() {
            return Ok(());
        }
        let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
        let lines: Vec<&str> = stderr.lines().collect();
        let tail = lines[lines.len().saturating_sub(5)..].join("\n");
        Err(PredictorError::Failed(format!("step {step}: {status}: {tail}")))
    }
}

fn parse_predictions(path: &Path) -> Result<Vec<f64>, PredictorError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PredictorError::Malformed(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| match l.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(PredictorError::Malformed(format!("line {}: `{l}` is not a finite score", i + 1))),
        })
        .collect()
}

impl Predictor for SubprocessPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn learn(&mut self, block: &Block, labels: &[u8], schema: &FeatureSchema, _: Duration) -> Result<(), PredictorError> {
        self.timed_io(|s| write_rows(s.path("train.csv"), schema, &block.rows, Some(labels)))?;
        self.learned = true;
        Ok(())
    }

    fn predict(&mut self, block: &Block, schema: &FeatureSchema, remaining: Duration) -> Result<Vec<f64>, PredictorError> {
        if !self.learned {
            return Err(PredictorError::Failed("predict called before any labeled block".into()));
        }
        let preds = self.path("predictions.txt");
        self.timed_io(|s| {
            write_rows(s.path("test.csv"), schema, &block.rows, None)?;
            write_schema_file(s.path("schema.csv"), schema)?;
            match fs::remove_file(&preds) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(&preds, e)),
                _ => Ok(()),
            }
        })?;
        self.run(block.index, remaining)?;
        let start = Instant::now();
        let scores = parse_predictions(&preds);
        self.overhead += start.elapsed();
        scores
    }

    fn take_overhead(&mut self) -> Duration {
        std::mem::take(&mut self.overhead)
    }
}

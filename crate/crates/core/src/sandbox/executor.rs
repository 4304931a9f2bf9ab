use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::SandboxError;
use crate::exec::Semaphore;
use crate::profile;

const CONTAINER_WORKDIR: &str = "/workspace";
const CONTAINER_SCRATCH: &str = "/scratch";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorKind {
    #[default]
    LocalProcess,
    /// `<runtime> run --rm -v <workdir>:/workspace -v <scratch>:/scratch <image> <command>`
    Container { runtime: String, image: String },
}

/// Runs adapter commands. Shared by all sandboxes; its semaphore caps the
/// number of commands executing at once.
#[derive(Debug)]
pub struct Executor {
    kind: ExecutorKind,
    slots: Semaphore,
}

pub(crate) struct ProcessOutcome {
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub stderr: String,
}

impl Executor {
    pub fn new(kind: ExecutorKind, max_concurrent: usize) -> Self {
        Executor { kind, slots: Semaphore::new(max_concurrent.max(1)) }
    }

    pub fn local(max_concurrent: usize) -> Self {
        Self::new(ExecutorKind::LocalProcess, max_concurrent)
    }

    pub fn kind(&self) -> &ExecutorKind {
        &self.kind
    }

    /// Absolute paths that may leak into logs, with their replacements.
    pub(crate) fn path_aliases(&self, workdir: &Path) -> Vec<(String, &'static str)> {
        let mut out = vec![(workdir.to_string_lossy().into_owned(), ".")];
        if matches!(self.kind, ExecutorKind::Container { .. }) {
            out.push((CONTAINER_WORKDIR.to_string(), "."));
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn run(
        &self,
        template: &[String],
        workdir: &Path,
        scratch: &Path,
        report_path: &Path,
        tests: Option<&[String]>,
        env: &BTreeMap<String, String>,
        timeout: Duration,
    ) -> Result<ProcessOutcome, SandboxError> {
        let argv = match &self.kind {
            ExecutorKind::LocalProcess => profile::expand_command(
                template,
                &workdir.to_string_lossy(),
                &report_path.to_string_lossy(),
                tests,
            ),
            ExecutorKind::Container { runtime, image } => {
                let name = report_path.file_name().unwrap_or_default().to_string_lossy();
                let inner = profile::expand_command(
                    template,
                    CONTAINER_WORKDIR,
                    &format!("{CONTAINER_SCRATCH}/{name}"),
                    tests,
                );
                let mut argv = vec![
                    runtime.clone(),
                    "run".into(),
                    "--rm".into(),
                    "--network=none".into(),
                    "-v".into(),
                    format!("{}:{CONTAINER_WORKDIR}", workdir.display()),
                    "-v".into(),
                    format!("{}:{CONTAINER_SCRATCH}", scratch.display()),
                    "-w".into(),
                    CONTAINER_WORKDIR.into(),
                ];
                for (k, v) in env {
                    argv.push("-e".into());
                    argv.push(format!("{k}={v}"));
                }
                argv.push(image.clone());
                argv.extend(inner);
                argv
            }
        };
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| SandboxError::EnvSetupFailure("empty command".into()))?;

        let _permit = self.slots.acquire();
        let mut cmd = Command::new(program);
        cmd.args(args)
            .current_dir(workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        if matches!(self.kind, ExecutorKind::LocalProcess) {
            cmd.envs(env);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| SandboxError::EnvSetupFailure(format!("cannot start {program}: {e}")))?;
        let mut pipe = child.stderr.take().expect("stderr piped");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = pipe.read_to_end(&mut buf);
            buf
        });

        let started = Instant::now();
        let mut timed_out = false;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if started.elapsed() >= timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    timed_out = true;
                    break None;
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(SandboxError::EnvSetupFailure(e.to_string())),
            }
        };
        let stderr = reader.join().unwrap_or_default();
        Ok(ProcessOutcome {
            exit_code: status.and_then(|s| s.code()),
            timed_out,
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
        })
    }
}

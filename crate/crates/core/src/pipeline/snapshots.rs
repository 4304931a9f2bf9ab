use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::config::RepoSpec;
use crate::index::RepoSnapshot;
use crate::profile::LanguageProfile;

fn git(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .output()
        .map_err(|e| format!("git: {e}"))?;
    if !out.status.success() {
        return Err(format!("git {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn export_commit(repo: &Path, sha: &str, dest: &Path) -> Result<(), String> {
    let partial = dest.with_extension("partial");
    let _ = std::fs::remove_dir_all(&partial);
    std::fs::create_dir_all(&partial).map_err(|e| format!("{}: {e}", partial.display()))?;
    let mut archive = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["archive", "--format=tar", sha])
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| format!("git archive: {e}"))?;
    let tar = Command::new("tar")
        .arg("-x")
        .arg("-C")
        .arg(&partial)
        .stdin(archive.stdout.take().expect("piped"))
        .status()
        .map_err(|e| format!("tar: {e}"))?;
    let git_ok = archive.wait().map_err(|e| format!("git archive: {e}"))?.success();
    if !git_ok || !tar.success() {
        return Err(format!("could not export {sha} from {}", repo.display()));
    }
    std::fs::rename(&partial, dest).map_err(|e| format!("{}: {e}", dest.display()))
}

/// Snapshots for one configured repo. Commits are exported once into
/// `work/snapshots/<repo>/<sha12>` and reused afterwards.
pub(crate) fn materialize(spec: &RepoSpec, profile: &LanguageProfile, work: &Path) -> Result<Vec<RepoSnapshot>, String> {
    let source: PathBuf = match (&spec.path, &spec.url) {
        (Some(p), _) => p.clone(),
        (None, Some(url)) => {
            let dest = work.join("clones").join(&spec.name);
            if !dest.join(".git").exists() {
                std::fs::create_dir_all(work.join("clones")).map_err(|e| e.to_string())?;
                let status = Command::new("git")
                    .args(["clone", "--quiet", url])
                    .arg(&dest)
                    .status()
                    .map_err(|e| format!("git clone: {e}"))?;
                if !status.success() {
                    return Err(format!("git clone {url} failed"));
                }
            }
            dest
        }
        (None, None) => return Err(format!("repo {} has neither path nor url", spec.name)),
    };
    if spec.commits.is_empty() {
        return Ok(vec![RepoSnapshot::from_dir(&source, profile.clone()).map_err(|e| e.to_string())?]);
    }
    let mut out = Vec::new();
    for c in &spec.commits {
        let sha = git(&source, &["rev-parse", "--verify", &format!("{c}^{{commit}}")])?;
        let dest = work.join("snapshots").join(&spec.name).join(&sha[..12]);
        if !dest.is_dir() {
            std::fs::create_dir_all(dest.parent().expect("nested")).map_err(|e| e.to_string())?;
            export_commit(&source, &sha, &dest)?;
        }
        out.push(RepoSnapshot::new(&dest, sha, profile.clone()).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Directory name for a snapshot's stage outputs.
pub(crate) fn commit_dir(commit_id: &str) -> String {
    if commit_id.len() == 40 && commit_id.chars().all(|c| c.is_ascii_hexdigit()) {
        commit_id[..12].to_string()
    } else {
        commit_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
    }
}

//! Content hashing helpers.

use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Hash a sequence of parts with length framing so that `("ab","c")` and
/// `("a","bc")` differ.
pub fn hash_parts<I, P>(parts: I) -> String
where
    I: IntoIterator<Item = P>,
    P: AsRef<[u8]>,
{
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Derive a 64-bit seed from a base seed and a label.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let digest = Sha256::digest(
        [base.to_le_bytes().as_slice(), label.as_bytes()].concat(),
    );
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Hash of every regular file under `root`: relative paths and contents, in
/// sorted path order. Symlinks are hashed by their target path.
pub fn dir_hash(root: &Path) -> io::Result<String> {
    let mut h = Sha256::new();
    let mut entries = Vec::new();
    for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields children of root")
            .to_string_lossy()
            .replace('\\', "/");
        if rel.is_empty() {
            continue;
        }
        entries.push((rel, entry));
    }
    for (rel, entry) in entries {
        let ft = entry.file_type();
        if ft.is_file() {
            let data = std::fs::read(entry.path())?;
            h.update(b"F");
            h.update((rel.len() as u64).to_le_bytes());
            h.update(rel.as_bytes());
            h.update((data.len() as u64).to_le_bytes());
            h.update(&data);
        } else if ft.is_symlink() {
            let target = std::fs::read_link(entry.path())?;
            let target = target.to_string_lossy();
            h.update(b"L");
            h.update(rel.as_bytes());
            h.update(target.as_bytes());
        } else if ft.is_dir() {
            h.update(b"D");
            h.update(rel.as_bytes());
        }
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_separates_parts() {
        assert_ne!(hash_parts(["ab", "c"]), hash_parts(["a", "bc"]));
        assert_eq!(hash_parts(["a", "b"]), hash_parts(["a", "b"]));
    }

    #[test]
    fn dir_hash_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "one").unwrap();
        let h1 = dir_hash(dir.path()).unwrap();
        assert_eq!(h1, dir_hash(dir.path()).unwrap());
        std::fs::write(dir.path().join("a.txt"), "two").unwrap();
        assert_ne!(h1, dir_hash(dir.path()).unwrap());
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_eq!(derive_seed(7, "x"), derive_seed(7, "x"));
    }
}

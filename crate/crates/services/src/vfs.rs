//! Virtual file trees backing transfer collections.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::ServiceError;

/// Normalize to an absolute path with no empty, `.` or `..` segments.
/// The root is `/`.
pub fn normalize_path(path: &str) -> Result<String, ServiceError> {
    if !path.starts_with('/') {
        return Err(ServiceError::InvalidPath(path.to_string()));
    }
    let mut parts = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => return Err(ServiceError::InvalidPath(path.to_string())),
            s => parts.push(s),
        }
    }
    Ok(format!("/{}", parts.join("/")))
}

fn parent(path: &str) -> Option<&str> {
    if path == "/" {
        return None;
    }
    match path.rfind('/') {
        Some(0) => Some("/"),
        Some(i) => Some(&path[..i]),
        None => None,
    }
}

fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

fn dir_prefix(dir: &str) -> String {
    if dir == "/" {
        "/".to_string()
    } else {
        format!("{dir}/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub content: Vec<u8>,
    pub mtime: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub size: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtime: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VirtualTree {
    files: BTreeMap<String, FileEntry>,
    dirs: BTreeSet<String>,
}

impl VirtualTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn file(&self, path: &str) -> Option<&FileEntry> {
        self.files.get(path)
    }

    pub fn files(&self) -> impl Iterator<Item = (&String, &FileEntry)> {
        self.files.iter()
    }

    pub fn is_dir(&self, path: &str) -> bool {
        if path == "/" || self.dirs.contains(path) {
            return true;
        }
        let prefix = dir_prefix(path);
        self.files
            .range(prefix.clone()..)
            .next()
            .is_some_and(|(p, _)| p.starts_with(&prefix))
    }

    pub fn exists(&self, path: &str) -> bool {
        self.files.contains_key(path) || self.is_dir(path)
    }

    fn add_parents(&mut self, path: &str) {
        let mut cur = parent(path);
        while let Some(p) = cur {
            if p != "/" {
                self.dirs.insert(p.to_string());
            }
            cur = parent(p);
        }
    }

    pub fn mkdir(&mut self, path: &str) -> Result<(), ServiceError> {
        let path = normalize_path(path)?;
        if path != "/" {
            self.add_parents(&path);
            self.dirs.insert(path);
        }
        Ok(())
    }

    /// Write a file, creating parent directories.
    pub fn write(&mut self, path: &str, content: Vec<u8>, mtime: u64) -> Result<(), ServiceError> {
        let path = normalize_path(path)?;
        if path == "/" || self.is_dir(&path) {
            return Err(ServiceError::InvalidPath(path));
        }
        self.add_parents(&path);
        self.files.insert(path, FileEntry { content, mtime });
        Ok(())
    }

    pub fn remove(&mut self, path: &str) -> bool {
        self.files.remove(path).is_some() || self.dirs.remove(path)
    }

    /// Files under `path` as (relative path, entry). A file path yields itself
    /// with an empty relative path.
    pub fn snapshot(&self, path: &str) -> Vec<(String, FileEntry)> {
        if let Some(f) = self.files.get(path) {
            return vec![(String::new(), f.clone())];
        }
        let prefix = dir_prefix(path);
        self.files
            .range(prefix.clone()..)
            .take_while(|(p, _)| p.starts_with(&prefix))
            .map(|(p, f)| (p[prefix.len()..].to_string(), f.clone()))
            .collect()
    }

    /// Immediate children in lexicographic order.
    pub fn list(&self, path: &str) -> Option<Vec<DirEntry>> {
        if !self.is_dir(path) {
            return None;
        }
        let prefix = dir_prefix(path);
        let mut children: BTreeMap<String, DirEntry> = BTreeMap::new();
        for (p, f) in self
            .files
            .range(prefix.clone()..)
            .take_while(|(p, _)| p.starts_with(&prefix))
        {
            let rest = &p[prefix.len()..];
            match rest.split_once('/') {
                None => {
                    children.insert(
                        rest.to_string(),
                        DirEntry {
                            name: rest.to_string(),
                            kind: "file",
                            size: f.content.len() as u64,
                            mtime: Some(f.mtime),
                        },
                    );
                }
                Some((dir, _)) => {
                    let e = children.entry(dir.to_string()).or_insert_with(|| DirEntry {
                        name: dir.to_string(),
                        kind: "dir",
                        size: 0,
                        mtime: None,
                    });
                    e.size += f.content.len() as u64;
                }
            }
        }
        for d in self.dirs.range(prefix.clone()..).take_while(|d| d.starts_with(&prefix)) {
            let rest = &d[prefix.len()..];
            let name = rest.split('/').next().unwrap_or(rest);
            children.entry(name.to_string()).or_insert_with(|| DirEntry {
                name: name.to_string(),
                kind: "dir",
                size: 0,
                mtime: None,
            });
        }
        Some(children.into_values().collect())
    }

    /// A nearby existing path for a missing `path`: first the longest suffix
    /// of it that exists, then the lexicographically first file sharing its
    /// basename.
    pub fn suggest(&self, path: &str) -> Option<String> {
        let segs: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
        for skip in 1..segs.len() {
            let candidate = format!("/{}", segs[skip..].join("/"));
            if self.exists(&candidate) {
                return Some(candidate);
            }
        }
        let base = basename(path);
        if base.is_empty() {
            return None;
        }
        self.files.keys().find(|p| basename(p) == base).cloned()
    }
}

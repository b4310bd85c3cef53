//! Precomputed feature maps on disk.
//!
//! A map file is little-endian: the magic `FMAP`, `u32` channels, height,
//! width, an `f32` stride, then `c·h·w` `f32` values in channel-major,
//! row-major order. A manifest lists one map per line as
//! `frame,kind,scale,angle,level,path` where `kind` is `template` or
//! `search`, `level` is `lo` or `hi` and `path` is relative to the
//! manifest's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{FeatureMap, FeaturePair, Level, PatchKey};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FMAP";

pub fn write_fmap(path: impl AsRef<Path>, map: &FeatureMap) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(20 + 4 * map.data().len());
    bytes.extend_from_slice(MAGIC);
    for v in [map.channels(), map.height(), map.width()] {
        bytes.extend_from_slice(&(v as u32).to_le_bytes());
    }
    bytes.extend_from_slice(&(map.stride() as f32).to_le_bytes());
    for v in map.data() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fmap(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|msg| Error::Format(format!("{}: {msg}", path.display())))
}

fn decode(bytes: &[u8]) -> std::result::Result<FeatureMap, String> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err("missing FMAP header".into());
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let c = u32::from_le_bytes(word(4)) as usize;
    let h = u32::from_le_bytes(word(8)) as usize;
    let w = u32::from_le_bytes(word(12)) as usize;
    let stride = f32::from_le_bytes(word(16)) as f64;
    let n = c * h * w;
    if bytes.len() != 20 + 4 * n {
        return Err(format!("expected {} payload bytes, found {}", 4 * n, bytes.len() - 20));
    }
    let data = (0..n).map(|i| f32::from_le_bytes(word(20 + 4 * i)) as f64).collect();
    FeatureMap::new(c, h, w, stride, data).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub frame: usize,
    pub template: bool,
    pub scale: f64,
    pub angle: f64,
    pub level: Level,
    pub path: PathBuf,
}

/// Map-file index; files are read lazily on lookup.
#[derive(Debug, Clone, Default)]
pub struct FeatureManifest {
    entries: HashMap<(usize, bool, i64, i64, Level), PathBuf>,
}

fn quantize(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

impl FeatureManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut manifest = FeatureManifest::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("frame,") {
                continue;
            }
            let entry = parse_entry(line, base).map_err(|m| Error::parse(path, i + 1, m))?;
            manifest.insert(entry);
        }
        Ok(manifest)
    }

    pub fn insert(&mut self, e: ManifestEntry) {
        let key = (e.frame, e.template, quantize(e.scale), quantize(e.angle), e.level);
        self.entries.insert(key, e.path);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, key: &PatchKey) -> Result<FeaturePair> {
        let (frame, template, s, a) = match *key {
            PatchKey::Template { frame } => (frame, true, 1.0, 0.0),
            PatchKey::Search {
                frame,
                scale,
                angle,
            } => (frame, false, scale, angle),
        };
        let read = |level: Level| {
            let k = (frame, template, quantize(s), quantize(a), level);
            let p = self.entries.get(&k).ok_or_else(|| {
                Error::Format(format!(
                    "no {} feature map for frame {frame} (s={s}, a={a}, {})",
                    if template { "template" } else { "search" },
                    level.name()
                ))
            })?;
            read_fmap(p)
        };
        Ok(FeaturePair {
            lo: read(Level::Lo)?,
            hi: read(Level::Hi)?,
        })
    }
}

fn parse_entry(line: &str, base: &Path) -> std::result::Result<ManifestEntry, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 6 {
        return Err(format!("expected 6 fields, found {}", f.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
    let template = match f[1] {
        "template" => true,
        "search" => false,
        k => return Err(format!("unknown kind {k:?}")),
    };
    let level = match f[4] {
        "lo" => Level::Lo,
        "hi" => Level::Hi,
        l => return Err(format!("unknown level {l:?}")),
    };
    Ok(ManifestEntry {
        frame: f[0].parse().map_err(|_| format!("bad frame {:?}", f[0]))?,
        template,
        scale: num(f[2])?,
        angle: num(f[3])?,
        level,
        path: base.join(f[5]),
    })
}

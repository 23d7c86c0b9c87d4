use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::array::NumArray;
use crate::error::{Error, Result};

/// Named parameters plus accumulated gradients. Cloning is cheap (copy-on-write
/// via `Rc`), which is how generator snapshots are taken.
#[derive(Default, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Arc<NumArray>>,
    grads: BTreeMap<String, NumArray>,
    version: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, arr: NumArray) {
        self.params.insert(name.to_string(), Arc::new(arr));
        self.version += 1;
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn arr(&self, name: &str) -> Result<&NumArray> {
        self.params
            .get(name)
            .map(|rc| rc.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter '{name}'")))
    }

    pub fn shared(&self, name: &str) -> Result<Arc<NumArray>> {
        self.params
            .get(name)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.values().map(|a| a.len()).sum()
    }

    /// Bumped on every mutation; used to invalidate derived caches.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Direct mutable access for perturbation (finite differences, tests).
    pub fn arr_mut(&mut self, name: &str) -> Result<&mut NumArray> {
        self.version += 1;
        let rc = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter '{name}'")))?;
        Ok(Arc::make_mut(rc))
    }

    pub fn zero_grads(&mut self) {
        self.grads.clear();
    }

    pub fn accumulate_grads(&mut self, grads: &BTreeMap<String, NumArray>) {
        for (name, g) in grads {
            debug_assert!(self.params.contains_key(name), "grad for unknown param {name}");
            self.grads
                .entry(name.clone())
                .and_modify(|acc| acc.add_scaled(g, 1.0))
                .or_insert_with(|| g.clone());
        }
    }

    pub fn grads(&self) -> &BTreeMap<String, NumArray> {
        &self.grads
    }

    pub fn grads_finite(&self) -> bool {
        self.grads.values().all(|g| g.all_finite())
    }

    /// `theta += scale * grad` for every accumulated gradient, then clears them.
    /// `scale` is `-lr` for descent and `+alpha` for ascent.
    pub fn apply_grads(&mut self, scale: f64) -> Result<()> {
        if !self.grads_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        let grads = std::mem::take(&mut self.grads);
        for (name, g) in &grads {
            let p = self.arr_mut(name)?;
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?} for {name}", p.shape()),
                    got: format!("{:?}", g.shape()),
                });
            }
            p.add_scaled(g, scale);
        }
        Ok(())
    }

    /// Scales every parameter gradient in place (e.g. 1/batch averaging).
    pub fn scale_grads(&mut self, scale: f64) {
        for g in self.grads.values_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }

    pub fn save(&self, path: &Path, meta: &BTreeMap<String, String>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(b"TRAJLAB1")?;
        write_u32(&mut w, meta.len() as u32)?;
        for (k, v) in meta {
            write_str(&mut w, k)?;
            write_str(&mut w, v)?;
        }
        write_u32(&mut w, self.params.len() as u32)?;
        for (name, arr) in &self.params {
            write_str(&mut w, name)?;
            write_u32(&mut w, arr.shape().len() as u32)?;
            for &d in arr.shape() {
                write_u64(&mut w, d as u64)?;
            }
            for &v in arr.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, BTreeMap<String, String>)> {
        let file = std::fs::File::open(path).map_err(|_| {
            Error::MissingCheckpoint(path.display().to_string())
        })?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"TRAJLAB1" {
            return Err(Error::Checkpoint(format!("bad magic in {}", path.display())));
        }
        let mut meta = BTreeMap::new();
        let n_meta = read_u32(&mut r)?;
        for _ in 0..n_meta {
            let k = read_str(&mut r)?;
            let v = read_str(&mut r)?;
            meta.insert(k, v);
        }
        let mut store = ParamStore::new();
        let n_params = read_u32(&mut r)?;
        for _ in 0..n_params {
            let name = read_str(&mut r)?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u64(&mut r)? as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            store.insert(&name, NumArray::new(shape, data)?);
        }
        Ok((store, meta))
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("bad utf8: {e}")))
}

//! Versioned on-disk store of trained models, one directory per point.
//!
//! Layout under the registry root:
//!
//! ```text
//! <sanitized point>/POINT           original point id
//! <sanitized point>/LATEST          highest version, decimal
//! <sanitized point>/.lock           advisory write lock
//! <sanitized point>/v00000001.lcm   one record per version
//! ```
//!
//! The record encoding is described in `docs/registry-format.md`.

use std::fs::{self, File, OpenOptions};
use std::hash::Hasher;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use twox_hash::XxHash64;

use crate::error::{Error, Result};
use crate::lstm::{LstmParameters, OptimizerKind, RegressorHead, TrainConfig};
use crate::pipeline::{FeatureMode, FeatureScaler, Metrics, SplitSpec, COLUMNS};
use crate::time::format_ts;
use crate::timeseries::PointId;

pub const MAGIC: [u8; 4] = *b"LCMR";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 16;
const TRAILER_LEN: usize = 8;

/// A trained model with everything needed to reproduce its forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub point: PointId,
    /// Assigned by [`Registry::put`]; 0 before the record is stored.
    pub version: u64,
    pub created_at: i64,
    pub feature_mode: FeatureMode,
    pub train_config: TrainConfig,
    pub split: SplitSpec,
    pub scaler: FeatureScaler,
    pub params: LstmParameters,
    pub head: RegressorHead,
    pub metrics: Metrics,
}

fn checksum(body: &[u8]) -> u64 {
    let mut h = XxHash64::with_seed(0);
    h.write(body);
    h.finish()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Integrity(format!("record truncated at body offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        for v in out {
            *v = self.f64()?;
        }
        Ok(())
    }
    fn vec_f64(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        self.f64s(&mut v)?;
        Ok(v)
    }
    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u32()? as usize;
        if v == 0 || v > 1 << 16 {
            return Err(Error::Integrity(format!("implausible {what} {v}")));
        }
        Ok(v)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Integrity("point id is not UTF-8".into()))
    }
}

impl ModelRecord {
    fn encode_body(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.str(self.point.as_str());
        w.u64(self.version);
        w.i64(self.created_at);
        w.u8(match self.feature_mode {
            FeatureMode::WeatherOnly => 0,
            FeatureMode::WeatherAndLoad => 1,
        });

        let c = &self.train_config;
        w.u32(c.epochs as u32);
        w.f64(c.learning_rate);
        match c.optimizer {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                w.u8(0);
                w.f64s(&[beta1, beta2, eps]);
            }
            OptimizerKind::Sgd => {
                w.u8(1);
                w.f64s(&[0.0, 0.0, 0.0]);
            }
        }
        w.u32(c.batch_size as u32);
        w.u32(c.lookback as u32);
        w.u32(c.hidden_dim as u32);
        w.f64(c.grad_clip_norm);
        w.u64(c.seed);

        w.u32(self.split.train_months);
        w.u32(self.split.test_months);
        w.u8(self.split.boundary.is_some() as u8);
        w.i64(self.split.boundary.unwrap_or(0));

        w.f64s(&self.scaler.mean);
        w.f64s(&self.scaler.std);
        w.i64(self.scaler.fit_start);
        w.i64(self.scaler.fit_end);

        w.u32(self.params.input_dim() as u32);
        w.u32(self.params.hidden_dim() as u32);
        w.u32(self.head.outputs() as u32);
        for s in self.params.slices().into_iter().chain(self.head.slices()) {
            w.f64s(s);
        }

        let m = &self.metrics;
        w.u64(m.pairs as u64);
        w.f64(m.overall_mse);
        w.f64(m.overall_mse_scaled);
        w.u32(m.per_step_mse.len() as u32);
        w.f64s(&m.per_step_mse);
        w.f64s(&m.per_step_mse_scaled);
        w.0
    }

    /// Canonical bytes: header, body, checksum of the body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.encode_body();
        let mut out = Vec::with_capacity(HEADER_LEN + body.len() + TRAILER_LEN);
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&[0, 0, 0]);
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&body);
        out.extend_from_slice(&checksum(&body).to_le_bytes());
        out
    }

    /// 64-bit checksum of the canonical body.
    pub fn payload_checksum(&self) -> u64 {
        checksum(&self.encode_body())
    }

    /// Decodes and verifies a record. Any corruption is an integrity error.
    pub fn from_bytes(bytes: &[u8]) -> Result<ModelRecord> {
        if bytes.len() < HEADER_LEN + TRAILER_LEN {
            return Err(Error::Integrity(format!("record is only {} bytes", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Integrity("bad magic bytes".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::Integrity(format!("unsupported format version {}", bytes[4])));
        }
        let body_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if body_len != (bytes.len() - HEADER_LEN - TRAILER_LEN) as u64 {
            return Err(Error::Integrity(format!(
                "body length {body_len} does not match file size {}",
                bytes.len()
            )));
        }
        let body = &bytes[HEADER_LEN..bytes.len() - TRAILER_LEN];
        let stored = u64::from_le_bytes(bytes[bytes.len() - TRAILER_LEN..].try_into().unwrap());
        let actual = checksum(body);
        if stored != actual {
            return Err(Error::Integrity(format!("checksum mismatch: stored {stored:016x}, computed {actual:016x}")));
        }
        let record = Self::decode_body(body)?;
        if bytes[5..8] != [0, 0, 0] {
            return Err(Error::Integrity("reserved header bytes are not zero".into()));
        }
        Ok(record)
    }

    fn decode_body(body: &[u8]) -> Result<ModelRecord> {
        let mut r = Reader { buf: body, pos: 0 };
        let point = PointId::new(r.str()?).map_err(|e| Error::Integrity(e.to_string()))?;
        let version = r.u64()?;
        let created_at = r.i64()?;
        let feature_mode = match r.u8()? {
            0 => FeatureMode::WeatherOnly,
            1 => FeatureMode::WeatherAndLoad,
            m => return Err(Error::Integrity(format!("unknown feature mode {m}"))),
        };

        let epochs = r.u32()? as usize;
        let learning_rate = r.f64()?;
        let opt = r.u8()?;
        let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
        let optimizer = match opt {
            0 => OptimizerKind::Adam { beta1, beta2, eps },
            1 => OptimizerKind::Sgd,
            o => return Err(Error::Integrity(format!("unknown optimizer {o}"))),
        };
        let train_config = TrainConfig {
            epochs,
            learning_rate,
            optimizer,
            batch_size: r.u32()? as usize,
            lookback: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            grad_clip_norm: r.f64()?,
            seed: r.u64()?,
        };

        let train_months = r.u32()?;
        let test_months = r.u32()?;
        let has_boundary = r.u8()? != 0;
        let b = r.i64()?;
        let split = SplitSpec { train_months, test_months, boundary: has_boundary.then_some(b) };

        let mut mean = [0.0; COLUMNS];
        let mut std = [0.0; COLUMNS];
        r.f64s(&mut mean)?;
        r.f64s(&mut std)?;
        let scaler = FeatureScaler { mean, std, fit_start: r.i64()?, fit_end: r.i64()? };

        let d = r.dim("input dimension")?;
        let h = r.dim("hidden dimension")?;
        let k = r.dim("output count")?;
        let mut params = LstmParameters::zeros(d, h);
        for s in params.slices_mut() {
            r.f64s(s)?;
        }
        let mut head = RegressorHead::zeros(h, k);
        for s in head.slices_mut() {
            r.f64s(s)?;
        }

        let pairs = r.u64()? as usize;
        let overall_mse = r.f64()?;
        let overall_mse_scaled = r.f64()?;
        let steps = r.u32()? as usize;
        if steps > 1 << 16 {
            return Err(Error::Integrity(format!("implausible metric length {steps}")));
        }
        let per_step_mse = r.vec_f64(steps)?;
        let per_step_mse_scaled = r.vec_f64(steps)?;
        if r.pos != body.len() {
            return Err(Error::Integrity(format!("{} trailing body bytes", body.len() - r.pos)));
        }
        Ok(ModelRecord {
            point,
            version,
            created_at,
            feature_mode,
            train_config,
            split,
            scaler,
            params,
            head,
            metrics: Metrics { pairs, overall_mse, per_step_mse, overall_mse_scaled, per_step_mse_scaled },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.head.validate(self.params.hidden_dim())?;
        if self.params.input_dim() != self.feature_mode.input_dim() {
            return Err(Error::invalid(format!(
                "input dimension {} does not match feature mode {:?}",
                self.params.input_dim(),
                self.feature_mode
            )));
        }
        if self.params.hidden_dim() != self.train_config.hidden_dim {
            return Err(Error::invalid("hidden dimension does not match train config"));
        }
        Ok(())
    }
}

/// One row of [`Registry::list`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VersionInfo {
    pub version: u64,
    pub created_at: i64,
    /// Overall test MSE in original units.
    pub test_mse: f64,
}

/// Handle to a registry directory. Cheap to clone and safe to share
/// between threads and processes.
#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
}

fn storage(what: &str, path: &Path, e: std::io::Error) -> Error {
    Error::Storage(format!("{what} {}: {e}", path.display()))
}

fn version_file(v: u64) -> String {
    format!("v{v:08}.lcm")
}

fn parse_version_file(name: &str) -> Option<u64> {
    let digits = name.strip_prefix('v')?.strip_suffix(".lcm")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|v| *v > 0)
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".tmp-{}-{name}", std::process::id()));
    let dest = dir.join(name);
    let mut f = File::create(&tmp).map_err(|e| storage("create", &tmp, e))?;
    f.write_all(bytes).map_err(|e| storage("write", &tmp, e))?;
    f.sync_all().map_err(|e| storage("sync", &tmp, e))?;
    drop(f);
    fs::rename(&tmp, &dest).map_err(|e| storage("rename", &dest, e))?;
    sync_dir(dir)
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir).and_then(|d| d.sync_all()).map_err(|e| storage("sync", dir, e))
}

/// Exclusive per-point lock, released on drop.
struct PointLock(File);

impl Drop for PointLock {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}

impl Registry {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| storage("create", &root, e))?;
        Ok(Registry { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn point_dir(&self, point: &PointId) -> PathBuf {
        self.root.join(point.sanitized())
    }

    fn lock(&self, dir: &Path) -> Result<PointLock> {
        let path = dir.join(".lock");
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| storage("open", &path, e))?;
        f.lock().map_err(|e| storage("lock", &path, e))?;
        Ok(PointLock(f))
    }

    /// Versions present for `point`, ascending. Unknown points yield an
    /// empty list.
    pub fn versions(&self, point: &PointId) -> Result<Vec<u64>> {
        let dir = self.point_dir(point);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(storage("read", &dir, e)),
        };
        let mut out = Vec::new();
        for e in entries {
            let e = e.map_err(|e| storage("read", &dir, e))?;
            if let Some(v) = e.file_name().to_str().and_then(parse_version_file) {
                out.push(v);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Stores `record` as the next version for its point and returns that
    /// version. The file appears atomically; earlier versions are untouched.
    pub fn put(&self, record: &ModelRecord) -> Result<u64> {
        record.validate()?;
        let dir = self.point_dir(&record.point);
        fs::create_dir_all(&dir).map_err(|e| storage("create", &dir, e))?;
        let _guard = self.lock(&dir)?;
        self.check_point_file(&dir, &record.point)?;
        self.clear_temp_files(&dir);
        let version = self.versions(&record.point)?.last().copied().unwrap_or(0) + 1;
        let mut stored = record.clone();
        stored.version = version;
        write_atomic(&dir, &version_file(version), &stored.to_bytes())?;
        write_atomic(&dir, "LATEST", format!("{version}\n").as_bytes())?;
        log::info!("registry: stored {} v{version}", record.point);
        Ok(version)
    }

    /// Two ids can sanitise to the same directory; the POINT file keeps
    /// them apart.
    fn check_point_file(&self, dir: &Path, point: &PointId) -> Result<()> {
        let path = dir.join("POINT");
        match fs::read_to_string(&path) {
            Ok(s) if s.trim_end_matches('\n') == point.as_str() => Ok(()),
            Ok(s) => Err(Error::Storage(format!(
                "directory {} belongs to point `{}`, not `{point}`",
                dir.display(),
                s.trim_end()
            ))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                write_atomic(dir, "POINT", format!("{point}\n").as_bytes())
            }
            Err(e) => Err(storage("read", &path, e)),
        }
    }

    /// Leftovers of writers that died mid-write. Only called under the lock.
    fn clear_temp_files(&self, dir: &Path) {
        if let Ok(entries) = fs::read_dir(dir) {
            for e in entries.flatten() {
                if e.file_name().to_string_lossy().starts_with(".tmp-") {
                    let _ = fs::remove_file(e.path());
                }
            }
        }
    }

    pub fn get_version(&self, point: &PointId, version: u64) -> Result<ModelRecord> {
        let path = self.point_dir(point).join(version_file(version));
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::not_found(format!("model {point} v{version}")))
            }
            Err(e) => return Err(storage("read", &path, e)),
        };
        let record = ModelRecord::from_bytes(&bytes).map_err(|e| e.with_context(path.display()))?;
        if &record.point != point || record.version != version {
            return Err(Error::Integrity(format!(
                "{} holds {} v{}",
                path.display(),
                record.point,
                record.version
            )));
        }
        Ok(record)
    }

    /// The highest stored version.
    pub fn get_latest(&self, point: &PointId) -> Result<ModelRecord> {
        match self.versions(point)?.last() {
            Some(v) => self.get_version(point, *v),
            None => Err(Error::not_found(format!("no models for point {point}"))),
        }
    }

    /// Version metadata, ascending. Every record is fully verified.
    pub fn list(&self, point: &PointId) -> Result<Vec<VersionInfo>> {
        self.versions(point)?
            .into_iter()
            .map(|v| {
                let r = self.get_version(point, v)?;
                Ok(VersionInfo { version: v, created_at: r.created_at, test_mse: r.metrics.overall_mse })
            })
            .collect()
    }

    /// Point ids with at least one directory in the registry.
    pub fn points(&self) -> Result<Vec<PointId>> {
        let mut out = Vec::new();
        for e in fs::read_dir(&self.root).map_err(|e| storage("read", &self.root, e))? {
            let e = e.map_err(|e| storage("read", &self.root, e))?;
            if let Ok(s) = fs::read_to_string(e.path().join("POINT")) {
                if let Ok(p) = PointId::new(s.trim_end_matches('\n')) {
                    out.push(p);
                }
            }
        }
        out.sort_by(|a, b| a.as_str().cmp(b.as_str()));
        Ok(out)
    }

    /// Deletes all but the newest `keep` versions; returns the removed ones.
    pub fn prune(&self, point: &PointId, keep: usize) -> Result<Vec<u64>> {
        if keep == 0 {
            return Err(Error::invalid("prune must keep at least one version"));
        }
        let dir = self.point_dir(point);
        if !dir.is_dir() {
            return Err(Error::not_found(format!("no models for point {point}")));
        }
        let _guard = self.lock(&dir)?;
        let versions = self.versions(point)?;
        let cut = versions.len().saturating_sub(keep);
        let removed = versions[..cut].to_vec();
        for v in &removed {
            let path = dir.join(version_file(*v));
            fs::remove_file(&path).map_err(|e| storage("remove", &path, e))?;
        }
        sync_dir(&dir)?;
        Ok(removed)
    }

    /// Re-stores version `v` as a new latest version, so a rollback keeps
    /// the version sequence monotonic. Returns the new version.
    pub fn promote(&self, point: &PointId, v: u64, now: i64) -> Result<u64> {
        let mut r = self.get_version(point, v)?;
        r.created_at = now;
        let nv = self.put(&r)?;
        log::info!("registry: promoted {point} v{v} as v{nv} at {}", format_ts(now));
        Ok(nv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::init_parameters;

    fn sample_record(point: &str, seed: u64) -> ModelRecord {
        let (params, head) = init_parameters(seed, 6, 3, 18).unwrap();
        ModelRecord {
            point: PointId::new(point).unwrap(),
            version: 0,
            created_at: 1_700_000_000,
            feature_mode: FeatureMode::WeatherOnly,
            train_config: TrainConfig { hidden_dim: 3, ..TrainConfig::default() },
            split: SplitSpec { boundary: Some(123), ..SplitSpec::default() },
            scaler: FeatureScaler { mean: [1.0; 7], std: [2.0; 7], fit_start: 0, fit_end: 3600 },
            params,
            head,
            metrics: Metrics {
                pairs: 4,
                overall_mse: 2.5,
                per_step_mse: vec![2.5; 18],
                overall_mse_scaled: 0.1,
                per_step_mse_scaled: vec![0.1; 18],
            },
        }
    }

    #[test]
    fn bytes_round_trip() {
        let r = sample_record("bldg/1 main", 3);
        let b = r.to_bytes();
        let back = ModelRecord::from_bytes(&b).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_bytes(), b);
    }

    #[test]
    fn every_byte_flip_is_detected() {
        let b = sample_record("p", 1).to_bytes();
        for i in 0..b.len() {
            let mut c = b.clone();
            c[i] ^= 0x10;
            let err = ModelRecord::from_bytes(&c).unwrap_err();
            assert!(err.is_integrity(), "byte {i}: {err}");
        }
        for n in 0..b.len() {
            assert!(ModelRecord::from_bytes(&b[..n]).unwrap_err().is_integrity());
        }
    }

    #[test]
    fn versions_and_isolation() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::open(dir.path()).unwrap();
        let a = sample_record("A", 1);
        let b = sample_record("B", 2);
        assert_eq!(reg.put(&a).unwrap(), 1);
        assert_eq!(reg.put(&b).unwrap(), 1);
        let b_latest = reg.get_latest(&b.point).unwrap();
        assert_eq!(reg.put(&a).unwrap(), 2);
        assert_eq!(reg.put(&a).unwrap(), 3);
        assert_eq!(reg.get_latest(&b.point).unwrap(), b_latest);
        let latest = reg.get_latest(&a.point).unwrap();
        assert_eq!(latest.version, 3);
        assert_eq!(ModelRecord { version: 0, ..latest }, a);
        assert!(reg.get_version(&a.point, 9).unwrap_err().is_not_found());
        assert!(reg.get_latest(&PointId::new("C").unwrap()).unwrap_err().is_not_found());
        let list = reg.list(&a.point).unwrap();
        assert_eq!(list.iter().map(|v| v.version).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(fs::read_to_string(dir.path().join("A/LATEST")).unwrap(), "3\n");
        assert_eq!(reg.points().unwrap().len(), 2);
    }

    #[test]
    fn corrupt_file_is_integrity_not_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::open(dir.path()).unwrap();
        let r = sample_record("P", 1);
        reg.put(&r).unwrap();
        let path = dir.path().join("P").join(version_file(1));
        let mut bytes = fs::read(&path).unwrap();
        bytes[100] ^= 1;
        fs::write(&path, bytes).unwrap();
        let err = reg.get_latest(&r.point).unwrap_err();
        assert!(err.is_integrity() && !err.is_not_found(), "{err}");
    }

    #[test]
    fn prune_and_promote() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::open(dir.path()).unwrap();
        let r = sample_record("P", 1);
        for _ in 0..4 {
            reg.put(&r).unwrap();
        }
        assert_eq!(reg.prune(&r.point, 2).unwrap(), vec![1, 2]);
        assert_eq!(reg.versions(&r.point).unwrap(), vec![3, 4]);
        assert_eq!(reg.put(&r).unwrap(), 5);
        assert_eq!(reg.promote(&r.point, 3, 42).unwrap(), 6);
        let l = reg.get_latest(&r.point).unwrap();
        assert_eq!((l.version, l.created_at), (6, 42));
        assert!(reg.prune(&r.point, 0).is_err());
    }

    #[test]
    fn version_file_names() {
        assert_eq!(version_file(7), "v00000007.lcm");
        assert_eq!(parse_version_file("v00000007.lcm"), Some(7));
        assert_eq!(parse_version_file("v.lcm"), None);
        assert_eq!(parse_version_file("v00000000.lcm"), None);
        assert_eq!(parse_version_file(".tmp-1-v00000001.lcm"), None);
    }
}

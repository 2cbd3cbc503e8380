//! Output directory layout:
//!
//! ```text
//! <base>/<task>-<timestamp>/
//!     report.json     deterministic result body with the resolved config
//!     run.json        timestamps and wall time
//!     trace.jsonl     optimizer observations (optimize only)
//!     curves/*.csv    parameter_or_wavelength,value,metric
//!     farfield/*.csv  far-field amplitudes with a .json sidecar
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub struct OutputDir {
    pub root: PathBuf,
}

impl OutputDir {
    /// Creates a fresh timestamped directory under `base`.
    pub fn create(base: &Path, task: &str) -> std::io::Result<Self> {
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
        let mut root = base.join(format!("{task}-{stamp}"));
        let mut n = 1;
        while root.exists() {
            root = base.join(format!("{task}-{stamp}-{n}"));
            n += 1;
        }
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn at(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<PathBuf> {
        let p = self.path(name);
        let mut w = BufWriter::new(File::create(&p)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(p)
    }

    /// Writes `curves/<stem>.csv` with one `(x, value)` row per sample.
    pub fn write_curve(&self, stem: &str, metric: &str, samples: &[(f64, f64)]) -> Result<PathBuf, csv::Error> {
        let dir = self.path("curves");
        fs::create_dir_all(&dir)?;
        let p = dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["parameter_or_wavelength", "value", "metric"])?;
        for (x, v) in samples {
            w.write_record([x.to_string(), v.to_string(), metric.to_string()])?;
        }
        w.flush()?;
        Ok(p)
    }
}

//! Config-driven run: parse a JSON config, run its task and list the
//! artifacts written.

use nanocone::io::{parse_config, run_task, OutputDir};

const CONFIG: &str = r#"{
    "geometry": { "h_nm": 511, "rt_nm": 848 },
    "dipole": { "dz_nm": 82 },
    "solver": { "points_per_wavelength": 12 },
    "task": { "kind": "export_farfield", "n_theta": 46, "n_phi": 91 }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(CONFIG)?;
    let out = OutputDir::create(&std::env::temp_dir().join("nanocone-runs"), cfg.task.name())?;
    let outcome = run_task(&cfg, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    let mut files = vec![];
    let mut stack = vec![outcome.dir.clone()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() { stack.push(p) } else { files.push(p) }
        }
    }
    files.sort();
    for f in files {
        println!("  {}", f.strip_prefix(&outcome.dir)?.display());
    }
    Ok(())
}

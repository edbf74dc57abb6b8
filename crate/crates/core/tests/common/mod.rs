#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;

pub struct ToyFiles {
    pub returns: PathBuf,
    pub factors: PathBuf,
}

/// Weekly returns for `n` assets over `t` Fridays, three factors plus RF.
/// Cells listed in `gaps` as (asset, week) are left empty.
pub fn write_toy(dir: &Path, t: usize, n: usize, seed: u64, gaps: &[(usize, usize)]) -> ToyFiles {
    let mut rng = tvalpha::rng::stream(seed);
    let start = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
    let mut fac = String::from("date,MKT,SMB,HML,RF\n");
    let mut ret = String::from("date");
    for i in 0..n {
        ret.push_str(&format!(",S{i:03}"));
    }
    ret.push('\n');
    for w in 0..t {
        let date = (start + Duration::weeks(w as i64)).format("%Y-%m-%d").to_string();
        let f: Vec<f64> = (0..3).map(|_| 0.002 + 0.02 * rng.sample::<f64, _>(StandardNormal)).collect();
        let rf = 0.0005;
        fac.push_str(&format!("{date},{},{},{},{rf}\n", f[0], f[1], f[2]));
        ret.push_str(&date);
        for i in 0..n {
            if gaps.contains(&(i, w)) {
                ret.push(',');
                continue;
            }
            let beta = 0.8 + 0.4 * (i as f64 / n as f64);
            let r = rf + beta * f[0] + 0.3 * f[1] + 0.03 * rng.sample::<f64, _>(StandardNormal);
            ret.push_str(&format!(",{r}"));
        }
        ret.push('\n');
    }
    let files = ToyFiles {
        returns: dir.join("returns.csv"),
        factors: dir.join("factors.csv"),
    };
    fs::write(&files.returns, ret).unwrap();
    fs::write(&files.factors, fac).unwrap();
    files
}

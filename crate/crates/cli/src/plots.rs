//! gnuplot scripts for the CSV files of a run directory. Scripts refer to
//! their data by relative path and are meant to be run from that directory.

use crate::CliError;
use serde_json::Value;
use std::fs;
use std::path::Path;

const ORBIT_CSV: &str = "orbit.csv";
const SWEEP_CSV: &str = "sweep.csv";

fn read_json(dir: &Path, name: &str) -> Result<Value, CliError> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

fn number(v: &Value, key: &str, file: &Path) -> Result<f64, CliError> {
    v[key].as_f64().ok_or_else(|| CliError::Missing(file.join(key)))
}

/// `±c_fit·ε` from the experiment record next to the orbit, if any.
fn confinement_band(dir: &Path) -> Result<Option<f64>, CliError> {
    for name in ["drift.json", "connect.json"] {
        if dir.join(name).is_file() {
            let v = read_json(dir, name)?;
            let path = dir.join(name);
            return Ok(Some(number(&v, "c_fit", &path)? * number(&v, "epsilon", &path)?));
        }
    }
    Ok(None)
}

fn orbit_script(band: Option<f64>) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,700\n\
         set output 'orbit.png'\n\
         set multiplot layout 2,1\n\
         set xlabel 't'\n\
         set ylabel 'I1'\n\
         plot 'orbit.csv' using 1:4 every ::1 with lines title 'I1(t)'\n\
         set ylabel 'I2'\n",
    );
    match band {
        Some(b) => s.push_str(&format!(
            "band = {b:.16e}\n\
             plot 'orbit.csv' using 1:5 every ::1 with lines title 'I2(t)', \\\n\
             \x20    band with lines dashtype 2 lc rgb 'gray' title '+c_fit eps', \\\n\
             \x20    -band with lines dashtype 2 lc rgb 'gray' title '-c_fit eps'\n"
        )),
        None => s.push_str("plot 'orbit.csv' using 1:5 every ::1 with lines title 'I2(t)'\n"),
    }
    s.push_str("unset multiplot\n");
    s
}

fn sweep_script(p: f64, a: f64) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 800,600\n\
         set output 'sweep.png'\n\
         set logscale xy\n\
         set xlabel 'epsilon'\n\
         set ylabel 'tau'\n\
         p = {p:.16e}\n\
         A = {a:.16e}\n\
         plot 'sweep.csv' using 1:3 every ::1 with points pt 7 title 'measured', \\\n\
         \x20    A * x**(-p) with lines title sprintf('A eps^(-%.3f)', p)\n"
    )
}

/// Writes `orbit.gp` and/or `sweep.gp` and returns their names.
pub fn emit_plots(dir: &Path) -> Result<Vec<&'static str>, CliError> {
    let has_orbit = dir.join(ORBIT_CSV).is_file();
    let has_sweep = dir.join(SWEEP_CSV).is_file();
    if !has_orbit && !has_sweep {
        return Err(CliError::Missing(dir.join(format!("{ORBIT_CSV} or {SWEEP_CSV}"))));
    }
    let mut written = Vec::new();
    if has_orbit {
        let path = dir.join("orbit.gp");
        fs::write(&path, orbit_script(confinement_band(dir)?)).map_err(|e| CliError::io(&path, e))?;
        written.push("orbit.gp");
    }
    if has_sweep {
        let fit_path = dir.join("fit.json");
        if !fit_path.is_file() {
            return Err(CliError::Missing(fit_path));
        }
        let fit = read_json(dir, "fit.json")?;
        let path = dir.join("sweep.gp");
        fs::write(&path, sweep_script(number(&fit, "p", &fit_path)?, number(&fit, "A", &fit_path)?))
            .map_err(|e| CliError::io(&path, e))?;
        written.push("sweep.gp");
    }
    Ok(written)
}

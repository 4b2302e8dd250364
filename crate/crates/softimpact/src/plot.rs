//! Gnuplot scripts written next to each CSV output.

use std::path::Path;

use anyhow::Result;

fn name(csv: &Path) -> String {
    csv.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn header(csv: &Path, title: &str) -> String {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n\
         set terminal pngcairo size 1000,700\nset output '{stem}.png'\nset title '{title}'\n"
    )
}

pub fn trajectory(csv: &Path, has_q: bool) -> String {
    let f = name(csv);
    let mut s = header(csv, "Mean trajectory");
    if has_q {
        s.push_str("set multiplot layout 2,1\n");
    }
    s.push_str(&format!("set xlabel 't'\nplot '{f}' using 1:2 with lines title 'X', '' using 1:3 with lines title 'P'\n"));
    if has_q {
        s.push_str(&format!(
            "set logscale y\nset ylabel '|q_n|'\nplot '{f}' using 1:(abs(column('q2'))) with lines title 'q2', \
             '' using 1:(abs(column('q3'))) with lines title 'q3', '' using 1:(abs(column('q4'))) with lines title 'q4'\n\
             unset multiplot\n"
        ));
    }
    s
}

pub fn bifurcation(csv: &Path) -> String {
    let f = name(csv);
    let mut s = header(csv, "Bifurcation diagram (P = 0 section)");
    s.push_str(&format!(
        "set multiplot layout 2,1\nset xlabel 'x_wall'\nset ylabel 'X'\n\
         plot '{f}' using 1:2 with dots notitle\n\
         set ylabel 'lambda'\nplot '{f}' using 1:3 with linespoints notitle\nunset multiplot\n"
    ));
    s
}

pub fn lyapunov(csv: &Path) -> String {
    let f = name(csv);
    let mut s = header(csv, "Largest Lyapunov exponent per realization");
    s.push_str(&format!("set xlabel 'realization'\nset ylabel 'lambda'\nplot '{f}' using 1:3 with points notitle\n"));
    s
}

pub fn spectrum(csv: &Path) -> String {
    let f = name(csv);
    let mut s = header(csv, "Power spectrum of X");
    s.push_str(&format!(
        "set logscale y\nset xrange [0:10]\nset xlabel 'omega / Omega'\nset ylabel 'power'\n\
         plot '{f}' using 1:2 with lines notitle\n"
    ));
    s
}

pub fn noise_fit(csv: &Path) -> String {
    let f = name(csv);
    let mut s = header(csv, "Bath correlation and exponential fit");
    s.push_str(&format!(
        "set xlabel 'tau'\nset ylabel 'c(tau)'\n\
         plot '{f}' using 1:2 with lines title 'exact', '' using 1:3 with lines dt 2 title 'fit'\n"
    ));
    s
}

pub fn test01(csv: &Path) -> String {
    let f = name(csv);
    let mut s = header(csv, "0-1 test: K_c against c");
    s.push_str(&format!("set xlabel 'c'\nset ylabel 'K_c'\nset yrange [-0.2:1.1]\nplot '{f}' using 1:2 with points notitle\n"));
    s
}

/// Writes `script` next to `csv` with a `.gp` extension.
pub fn write_sidecar(csv: &Path, script: &str) -> Result<()> {
    std::fs::write(csv.with_extension("gp"), script)?;
    Ok(())
}

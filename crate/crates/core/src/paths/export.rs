use std::fmt::Write as _;

use super::drift::{current_drift, DriftEstimate};
use crate::error::Result;
use crate::model::io::fmt_f64;

/// `x..., beta, gamma, v, count, se` per cell; vector columns get a
/// `_d` suffix in more than one dimension. `se` is the standard error of `v`.
pub fn drift_csv(beta: &DriftEstimate, gamma: &DriftEstimate) -> Result<String> {
    let v = current_drift(beta, gamma)?;
    let grid = beta.grid();
    let n = grid.dim();
    let cols = |name: &str| -> Vec<String> {
        if n == 1 {
            vec![name.to_string()]
        } else {
            (0..n).map(|d| format!("{name}_{d}")).collect()
        }
    };
    let mut header = cols("x");
    for name in ["beta", "gamma", "v"] {
        header.extend(cols(name));
    }
    header.push("count".into());
    header.extend(cols("se"));
    let mut out = header.join(",");
    out.push('\n');
    for c in 0..grid.len() {
        let mut row: Vec<String> = grid.center(c).into_iter().map(fmt_f64).collect();
        for field in [beta.value(c), gamma.value(c), v.value(c)] {
            row.extend(field.iter().map(|x| fmt_f64(*x)));
        }
        row.push(v.count(c).to_string());
        row.extend(v.se(c).iter().map(|x| fmt_f64(*x)));
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    #[test]
    fn header_and_rows() {
        let grid = Grid::uniform_1d(-1.0, 1.0, 3).unwrap();
        let b = DriftEstimate::from_fn(grid.clone(), 40, |x| vec![-x[0]]).unwrap();
        let csv = drift_csv(&b, &b).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,beta,gamma,v,count,se");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",40,0.0000000000000000e0"));
        let grid2 = Grid::cube(2, -1.0, 1.0, 2).unwrap();
        let b2 = DriftEstimate::from_fn(grid2, 40, |x| x.to_vec()).unwrap();
        let header = drift_csv(&b2, &b2).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "x_0,x_1,beta_0,beta_1,gamma_0,gamma_1,v_0,v_1,count,se_0,se_1");
    }
}

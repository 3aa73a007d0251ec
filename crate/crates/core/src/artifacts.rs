//! File artifacts: RFC-4180 CSV tables, run-metadata JSON, chi-matrix
//! serialization, and plain-text gnuplot scripts.
//!
//! CSV output is deterministic: floats are printed with 12 significant
//! digits in scientific notation, so identical data produce byte-identical
//! files.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::tomography::ProcessMatrix;
use crate::Result;

/// A float with 12 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000000e0".into();
    }
    format!("{:.11e}", v)
}

/// In-memory CSV table with a mandatory header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC-4180 serialization: comma separated, CRLF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push_str("\r\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            out.push_str(&cells.join(","));
            out.push_str("\r\n");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Serialize a chi matrix as 16 rows x 32 columns (real/imag interleaved).
pub fn chi_table(chi: &ProcessMatrix) -> CsvTable {
    let labels = crate::tomography::pauli_labels();
    let mut header = Vec::with_capacity(32);
    for l in labels {
        header.push(format!("re_{}", l.to_lowercase()));
        header.push(format!("im_{}", l.to_lowercase()));
    }
    let mut table =
        CsvTable { header, rows: Vec::with_capacity(16) };
    for m in 0..16 {
        let mut row = Vec::with_capacity(32);
        for n in 0..16 {
            row.push(chi.chi[(m, n)].re);
            row.push(chi.chi[(m, n)].im);
        }
        table.push(row);
    }
    table
}

/// Write a run-metadata JSON file next to the data.
pub fn write_metadata(path: &Path, metadata: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(metadata)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// gnuplot script for a line plot of selected CSV columns (1-based indices).
pub fn gnuplot_lines(
    csv_name: &str,
    title: &str,
    x_column: usize,
    x_label: &str,
    y_columns: &[(usize, &str)],
    y_label: &str,
) -> String {
    let mut plots = Vec::new();
    for (col, name) in y_columns {
        plots.push(format!("'{csv_name}' using {x_column}:{col} with linespoints title '{name}'"));
    }
    format!(
        "# gnuplot script; run: gnuplot -p {csv_name}.gnuplot\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set title '{title}'\n\
         set xlabel '{x_label}'\n\
         set ylabel '{y_label}'\n\
         set grid\n\
         plot {}\n",
        plots.join(", \\\n     ")
    )
}

/// gnuplot script for a heat map of long-format (x, y, value) CSV data.
pub fn gnuplot_heatmap(
    csv_name: &str,
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    format!(
        "# gnuplot script; run: gnuplot -p {csv_name}.gnuplot\n\
         set datafile separator ','\n\
         set title '{title}'\n\
         set xlabel '{x_label}'\n\
         set ylabel '{y_label}'\n\
         set view map\n\
         set pm3d interpolate 2,2\n\
         splot '{csv_name}' using 1:2:3 with pm3d notitle\n",
    )
}

/// Standard artifact triple for one experiment: data CSV, metadata JSON and
/// a plot script.
pub struct ArtifactSet {
    pub out_dir: PathBuf,
    pub stem: String,
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new(out_dir: &Path, stem: &str) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self { out_dir: out_dir.to_path_buf(), stem: stem.to_string(), written: Vec::new() })
    }

    pub fn csv_path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}{}.csv", self.stem, suffix))
    }

    pub fn write_csv(&mut self, suffix: &str, table: &CsvTable) -> Result<PathBuf> {
        let path = self.csv_path(suffix);
        table.write(&path)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_meta(&mut self, metadata: &serde_json::Value) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}_meta.json", self.stem));
        write_metadata(&path, metadata)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_plot_script(&mut self, script: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(format!("{}.gnuplot", self.stem));
        std::fs::write(&path, script)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_deterministic_and_12_digits() {
        assert_eq!(format_float(1.0), "1.00000000000e0");
        assert_eq!(format_float(0.0), "0.00000000000e0");
        assert_eq!(format_float(-3.18309886183791), "-3.18309886184e0");
        assert_eq!(format_float(6.21e-7), "6.21000000000e-7");
    }

    #[test]
    fn csv_round_trip_layout() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![1.0, 2.0]);
        t.push(vec![-0.5, 1e9]);
        let text = t.to_csv();
        let lines: Vec<&str> = text.split("\r\n").collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines.len(), 4); // header + 2 rows + trailing empty
        assert!(lines[2].starts_with("-5.00000000000e-1,"));
    }

    #[test]
    fn chi_table_shape() {
        let chi = ProcessMatrix::identity();
        let t = chi_table(&chi);
        assert_eq!(t.header.len(), 32);
        assert_eq!(t.rows.len(), 16);
        assert_eq!(t.header[0], "re_ii");
        assert_eq!(t.header[31], "im_zz");
        assert_eq!(t.rows[0][0], 1.0);
        assert_eq!(t.rows[0][1], 0.0);
    }

    #[test]
    fn artifact_set_writes_files() {
        let dir = std::env::temp_dir().join(format!("couplersim_test_{}", std::process::id()));
        let mut set = ArtifactSet::new(&dir, "demo").unwrap();
        let mut t = CsvTable::new(&["x"]);
        t.push(vec![1.0]);
        set.write_csv("", &t).unwrap();
        set.write_meta(&serde_json::json!({"seed": 7})).unwrap();
        set.write_plot_script(&gnuplot_lines("demo.csv", "t", 1, "x", &[(1, "x")], "y")).unwrap();
        assert_eq!(set.files().len(), 3);
        for f in set.files() {
            assert!(f.exists());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

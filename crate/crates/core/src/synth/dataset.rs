use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndmath::{Matrix, Rng};

/// `n` paired samples `(x ∈ R^dx, y ∈ R^dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    x: Matrix,
    y: Matrix,
}

const BINARY_MAGIC: &[u8; 8] = b"MIMEDS\x00\x01";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl DatasetFormat {
    /// `.bin` means binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => DatasetFormat::Binary,
            _ => DatasetFormat::Csv,
        }
    }
}

impl PairedDataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!("{} x rows vs {} y rows", x.rows(), y.rows())));
        }
        if x.cols() == 0 || y.cols() == 0 {
            return Err(Error::DimensionMismatch("x and y need at least one column".into()));
        }
        Ok(PairedDataset { x, y })
    }

    /// Splits the columns of `joint` into the first `dx` and the rest.
    pub fn from_joint(joint: &Matrix, dx: usize) -> Result<Self> {
        if dx == 0 || dx >= joint.cols() {
            return Err(Error::DimensionMismatch(format!("cannot split {} columns at {dx}", joint.cols())));
        }
        let n = joint.rows();
        PairedDataset::new(joint.block(0, n, 0, dx), joint.block(0, n, dx, joint.cols()))
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dx(&self) -> usize {
        self.x.cols()
    }

    pub fn dy(&self) -> usize {
        self.y.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    /// `[x, y]` rows.
    pub fn joint(&self) -> Matrix {
        self.x.hstack(&self.y).expect("row counts agree by construction")
    }

    pub fn select(&self, indices: &[usize]) -> PairedDataset {
        PairedDataset { x: self.x.select_rows(indices), y: self.y.select_rows(indices) }
    }

    /// Keeps `x` and permutes the `y` rows uniformly at random, which
    /// yields pairs from the product of the empirical marginals.
    pub fn shuffle_marginals(&self, rng: &mut Rng) -> Result<PairedDataset> {
        if self.n() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n() });
        }
        let perm = rng.permutation(self.n());
        Ok(PairedDataset { x: self.x.clone(), y: self.y.select_rows(&perm) })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        match DatasetFormat::from_path(path) {
            DatasetFormat::Csv => self.write_csv(File::create(path)?),
            DatasetFormat::Binary => self.write_binary(File::create(path)?),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match DatasetFormat::from_path(path) {
            DatasetFormat::Csv => PairedDataset::read_csv(File::open(path)?),
            DatasetFormat::Binary => PairedDataset::read_binary(File::open(path)?),
        }
    }

    /// CSV with header `x_0..x_{dx-1},y_0..y_{dy-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> =
            (0..self.dx()).map(|j| format!("x_{j}")).chain((0..self.dy()).map(|j| format!("y_{j}"))).collect();
        out.write_record(&header)?;
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            fields.clear();
            fields.extend(self.x.row(i).iter().chain(self.y.row(i)).map(|v| format!("{v:?}")));
            out.write_record(&fields)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let dx = header.iter().take_while(|h| h.starts_with("x_")).count();
        let dy = header.len() - dx;
        if dx == 0 || dy == 0 || !header.iter().skip(dx).all(|h| h.starts_with("y_")) {
            return Err(Error::Format("dataset header must be x_* columns then y_* columns".into()));
        }
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 =
                    field.trim().parse().map_err(|_| Error::Format(format!("row {n}: bad number {field:?}")))?;
                if j < dx {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            n += 1;
        }
        PairedDataset::new(Matrix::new(n, dx, xs)?, Matrix::new(n, dy, ys)?)
    }

    /// Magic, then `n`, `dx`, `dy` as u64 and the row-major `x` then `y`
    /// values, all little-endian.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = BufWriter::new(w);
        out.write_all(BINARY_MAGIC)?;
        for v in [self.n(), self.dx(), self.dy()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in self.x.data().iter().chain(self.y.data()) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut inp = BufReader::new(r);
        let mut magic = [0u8; 8];
        inp.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a binary dataset file".into()));
        }
        let mut word = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            inp.read_exact(&mut word)?;
            *d = u64::from_le_bytes(word) as usize;
        }
        let [n, dx, dy] = dims;
        let mut read_block = |len: usize| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                inp.read_exact(&mut word)?;
                v.push(f64::from_le_bytes(word));
            }
            Ok(v)
        };
        let xs = read_block(n * dx)?;
        let ys = read_block(n * dy)?;
        PairedDataset::new(Matrix::new(n, dx, xs)?, Matrix::new(n, dy, ys)?)
    }
}

/// Pearson correlation of two equally long slices.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use crate::ndmath::Rng;

    use super::*;

    fn small() -> PairedDataset {
        PairedDataset::new(
            Matrix::from_rows(&[[0.1, -2.0], [3.5, 1e-310], [7.0, 0.2]]).unwrap(),
            Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn mismatched_rows_rejected() {
        let e = PairedDataset::new(Matrix::zeros(3, 1), Matrix::zeros(2, 1));
        assert!(matches!(e, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn csv_header_and_values() {
        let mut buf = Vec::new();
        small().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,x_1,y_0\n"));
        assert_eq!(PairedDataset::read_csv(&buf[..]).unwrap(), small());
    }

    #[test]
    fn shuffle_keeps_x_and_permutes_y() {
        let ds = small();
        let s = ds.shuffle_marginals(&mut Rng::new(1)).unwrap();
        assert_eq!(s.x(), ds.x());
        let mut before = ds.y().data().to_vec();
        let mut after = s.y().data().to_vec();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        assert_eq!(before, after);
    }

    #[test]
    fn shuffle_of_two_is_identity_or_swap() {
        let ds = PairedDataset::new(
            Matrix::from_rows(&[[0.0], [1.0]]).unwrap(),
            Matrix::from_rows(&[[10.0], [20.0]]).unwrap(),
        )
        .unwrap();
        let mut seen = [false; 2];
        for seed in 0..64 {
            let s = ds.shuffle_marginals(&mut Rng::new(seed)).unwrap();
            match s.y().data() {
                [a, b] if *a == 10.0 && *b == 20.0 => seen[0] = true,
                [a, b] if *a == 20.0 && *b == 10.0 => seen[1] = true,
                other => panic!("not a permutation: {other:?}"),
            }
        }
        assert!(seen[0] && seen[1]);
        let one = ds.select(&[0]);
        assert!(matches!(one.shuffle_marginals(&mut Rng::new(0)), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn shuffle_breaks_correlation() {
        let mut rng = Rng::new(5);
        let n = 100_000;
        let rho: f64 = 0.9;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.standard_normal();
            let b = rho * a + (1.0 - rho * rho).sqrt() * rng.standard_normal();
            xs.push(a);
            ys.push(b);
        }
        let ds = PairedDataset::new(Matrix::new(n, 1, xs).unwrap(), Matrix::new(n, 1, ys).unwrap()).unwrap();
        assert!(pearson(ds.x().data(), ds.y().data()) > 0.89);
        let s = ds.shuffle_marginals(&mut rng).unwrap();
        assert!(pearson(s.x().data(), s.y().data()).abs() < 0.01);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(PairedDataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(PairedDataset::read_binary(&b"NOTMAGIC"[..]).is_err());
    }

    proptest! {
        #[test]
        fn binary_and_csv_round_trip_bit_exact(
            v in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..40),
            dx in 1usize..3,
        ) {
            let cols = dx + 1;
            let n = v.len() / cols;
            prop_assume!(n >= 1);
            let joint = Matrix::new(n, cols, v[..n * cols].to_vec()).unwrap();
            let ds = PairedDataset::from_joint(&joint, dx).unwrap();
            let mut bin = Vec::new();
            ds.write_binary(&mut bin).unwrap();
            let back = PairedDataset::read_binary(&bin[..]).unwrap();
            let mut text = Vec::new();
            ds.write_csv(&mut text).unwrap();
            let back_csv = PairedDataset::read_csv(&text[..]).unwrap();
            for other in [back, back_csv] {
                let same = other.joint().data().iter().zip(ds.joint().data()).all(|(a, b)| a.to_bits() == b.to_bits());
                prop_assert!(same);
            }
        }
    }
}

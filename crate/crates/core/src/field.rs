//! Vector-valued fields on a perforated grid and their on-disk formats.
//!
//! Binary layout (little endian): magic `MFLD`, format version `u32`, `d: u32`,
//! `l: u32`, `d` dimensions as `u64`, spacing `f64`, epsilon `f64`, then one
//! `l`-vector of `f64` per cell in row-major order (last axis fastest).
//! Undefined cells are stored as NaN.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::perforation::{CellLabel, PerforatedGrid};

const MAGIC: &[u8; 4] = b"MFLD";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<PerforatedGrid>,
    components: usize,
    values: Vec<f64>,
    defined: Vec<bool>,
}

impl VectorField {
    /// Field with every cell undefined.
    pub fn undefined(grid: Arc<PerforatedGrid>, components: usize) -> Self {
        let n = grid.num_cells();
        VectorField { grid, components, values: vec![0.0; n * components], defined: vec![false; n] }
    }

    /// Samples `f` at the centers of the cells selected by `mask`.
    pub fn from_fn<F>(grid: Arc<PerforatedGrid>, components: usize, mask: &[bool], mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut out = Self::undefined(grid, components);
        for idx in 0..mask.len() {
            if mask[idx] {
                let v = f(&out.grid.center(idx));
                out.set(idx, &v);
            }
        }
        out
    }

    /// Samples `f` on the SOLID cells, the natural input of the extension operators.
    pub fn on_solid<F>(grid: Arc<PerforatedGrid>, components: usize, f: F) -> Self
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mask = grid.solid_mask();
        Self::from_fn(grid, components, &mask, f)
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn num_cells(&self) -> usize {
        self.defined.len()
    }

    pub fn value(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.components..(idx + 1) * self.components]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut [f64] {
        self.defined[idx] = true;
        &mut self.values[idx * self.components..(idx + 1) * self.components]
    }

    pub fn set(&mut self, idx: usize, v: &[f64]) {
        self.value_mut(idx).copy_from_slice(v);
    }

    pub fn undefine(&mut self, idx: usize) {
        self.defined[idx] = false;
        self.values[idx * self.components..(idx + 1) * self.components].fill(0.0);
    }

    pub fn is_defined(&self, idx: usize) -> bool {
        self.defined[idx]
    }

    pub fn defined_mask(&self) -> &[bool] {
        &self.defined
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Copy keeping only the cells selected by `mask`.
    pub fn restricted(&self, mask: &[bool]) -> Self {
        let mut out = self.clone();
        for idx in 0..mask.len() {
            if !mask[idx] && out.defined[idx] {
                out.undefine(idx);
            }
        }
        out
    }

    pub fn restricted_to_solid(&self) -> Self {
        self.restricted(&self.grid.solid_mask())
    }

    /// `a * self + b * other` on the cells where both are defined.
    pub fn linear_combination(&self, a: f64, other: &VectorField, b: f64) -> Self {
        let mut out = Self::undefined(self.grid.clone(), self.components);
        for idx in 0..self.num_cells() {
            if self.defined[idx] && other.defined[idx] {
                let v = out.value_mut(idx);
                for (k, x) in v.iter_mut().enumerate() {
                    *x = a * self.value(idx)[k] + b * other.value(idx)[k];
                }
            }
        }
        out
    }

    /// Largest pointwise distance between two fields over cells defined in both.
    pub fn max_difference(&self, other: &VectorField) -> f64 {
        (0..self.num_cells())
            .filter(|&i| self.defined[i] && other.defined[i])
            .map(|i| crate::manifold::dist(self.value(i), other.value(i)))
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        (0..self.num_cells()).filter(|&i| self.defined[i]).all(|i| self.value(i).iter().all(|x| x.is_finite()))
    }

    /// Exact, bitwise equality on the cells selected by `mask`.
    pub fn bit_equal_on(&self, other: &VectorField, mask: &[bool]) -> bool {
        (0..self.num_cells()).filter(|&i| mask[i]).all(|i| {
            self.defined[i]
                && other.defined[i]
                && self.value(i).iter().zip(other.value(i)).all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }

    pub fn write_binary(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.components as u32).to_le_bytes())?;
        for &n in self.grid.dims() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        w.write_all(&self.grid.spacing.to_le_bytes())?;
        w.write_all(&self.grid.epsilon.to_le_bytes())?;
        for idx in 0..self.num_cells() {
            for &x in self.value(idx) {
                let x = if self.defined[idx] { x } else { f64::NAN };
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    /// CSV of a 2-d slice: the whole grid for `d = 2`, the layer `index`
    /// along the last axis for `d = 3`.
    pub fn write_slice_csv(&self, path: &Path, index: usize) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["i".to_string(), "j".into(), "x".into(), "y".into(), "label".into(), "defined".into()];
        header.extend((0..self.components).map(|k| format!("v{k}")));
        w.write_record(&header).map_err(io)?;
        let d = self.grid.dim();
        let dims = self.grid.dims();
        if d == 3 && index >= dims[2] {
            return Err(Error::InvalidGrid(format!("slice {index} outside 0..{}", dims[2])));
        }
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                let idx = if d == 2 { self.grid.flat_index(&[i, j]) } else { self.grid.flat_index(&[i, j, index]) };
                let c = self.grid.center(idx);
                let label = match self.grid.label(idx) {
                    CellLabel::Solid => "solid",
                    CellLabel::Hole => "hole",
                };
                let mut row = vec![
                    i.to_string(),
                    j.to_string(),
                    format!("{}", c[0]),
                    format!("{}", c[1]),
                    label.to_string(),
                    (self.defined[idx] as u8).to_string(),
                ];
                row.extend(self.value(idx).iter().map(|x| format!("{x}")));
                w.write_record(&row).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// Contents of a binary field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub components: usize,
    pub dims: Vec<usize>,
    pub spacing: f64,
    pub epsilon: f64,
    /// Row-major values, NaN where undefined.
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a field file"));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut BufReader<File>| -> std::io::Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        if read_u32(&mut r)? != VERSION {
            return Err(bad("unsupported field format version"));
        }
        let d = read_u32(&mut r)? as usize;
        let components = read_u32(&mut r)? as usize;
        let mut b8 = [0u8; 8];
        let mut dims = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            dims.push(u64::from_le_bytes(b8) as usize);
        }
        r.read_exact(&mut b8)?;
        let spacing = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let epsilon = f64::from_le_bytes(b8);
        let n: usize = dims.iter().product::<usize>() * components;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes after field data"));
        }
        Ok(FieldFile { components, dims, spacing, epsilon, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microcell::{make_microcell, HoleShape};
    use crate::perforation::{build_grid, BoxDomain, Variant};

    fn grid() -> Arc<PerforatedGrid> {
        let cell = make_microcell(HoleShape::disk(&[0.0, 0.0], 0.3), 2).unwrap();
        Arc::new(build_grid(&cell, &BoxDomain::unit(2), 0.25, 0.1, 1.0 / 32.0, Variant::Safe).unwrap())
    }

    #[test]
    fn binary_round_trip() {
        let g = grid();
        let f = VectorField::on_solid(g.clone(), 2, |x| vec![x[0], x[1] * x[1]]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.field");
        f.write_binary(&path).unwrap();
        let back = FieldFile::read(&path).unwrap();
        assert_eq!(back.dims, vec![32, 32]);
        assert_eq!(back.components, 2);
        assert_eq!(back.spacing, 1.0 / 32.0);
        for idx in 0..g.num_cells() {
            let v = &back.values[2 * idx..2 * idx + 2];
            if g.is_solid(idx) {
                assert_eq!(v, f.value(idx));
            } else {
                assert!(v.iter().all(|x| x.is_nan()));
            }
        }
        // header: 4 + 3*4 + 2*8 + 2*8 bytes
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 48 + 32 * 32 * 2 * 8);
    }

    #[test]
    fn csv_slice_has_one_row_per_cell() {
        let g = grid();
        let f = VectorField::on_solid(g, 2, |x| vec![x[0], 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        f.write_slice_csv(&path, 0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 32 * 32);
        assert!(text.lines().next().unwrap().starts_with("i,j,x,y,label,defined,v0,v1"));
    }

    #[test]
    fn restriction_and_combination() {
        let g = grid();
        let all = vec![true; g.num_cells()];
        let f = VectorField::from_fn(g.clone(), 1, &all, |x| vec![x[0]]);
        let s = f.restricted_to_solid();
        assert!(s.bit_equal_on(&f, &g.solid_mask()));
        assert!(!s.is_defined(g.hole_mask().iter().position(|&h| h).unwrap()));
        let c = f.linear_combination(2.0, &f, -1.0);
        assert!(c.max_difference(&f) < 1e-15);
    }
}

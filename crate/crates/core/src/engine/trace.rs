use std::io::{Read, Write};

use serde::Serialize;

use super::{combine, EngineError, ProblemInstance};
use crate::vector::Vector;

/// Per-iteration record of the parallel algorithm, stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    dim: usize,
    n_maps: usize,
    xs: Vec<f64>,
    res_a: Vec<f64>,
    res_t: Vec<f64>,
    dist_p: Vec<f64>,
    t: Vec<f64>,
    lambda: Vec<f64>,
}

/// Borrowed view of one trace entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<'a> {
    pub n: u64,
    pub x: &'a [f64],
    /// `‖x_n − A_n x_n‖`
    pub res_a: f64,
    /// `‖x_n − T_i x_n‖` per member
    pub res_t: &'a [f64],
    /// `‖x_n − p‖`
    pub dist_p: f64,
    pub t: f64,
    pub lambda: &'a [f64],
}

impl Trace {
    fn with_capacity(dim: usize, n_maps: usize, len: usize) -> Self {
        Trace {
            dim,
            n_maps,
            xs: Vec::with_capacity(len * dim),
            res_a: Vec::with_capacity(len),
            res_t: Vec::with_capacity(len * n_maps),
            dist_p: Vec::with_capacity(len),
            t: Vec::with_capacity(len),
            lambda: Vec::with_capacity(len * n_maps),
        }
    }

    /// Number of recorded iterates (`n_max + 1`).
    pub fn len(&self) -> u64 {
        self.res_a.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.res_a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_maps(&self) -> usize {
        self.n_maps
    }

    pub fn record(&self, n: u64) -> TraceRecord<'_> {
        let i = n as usize;
        TraceRecord {
            n,
            x: &self.xs[i * self.dim..(i + 1) * self.dim],
            res_a: self.res_a[i],
            res_t: &self.res_t[i * self.n_maps..(i + 1) * self.n_maps],
            dist_p: self.dist_p[i],
            t: self.t[i],
            lambda: &self.lambda[i * self.n_maps..(i + 1) * self.n_maps],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord<'_>> {
        (0..self.len()).map(|n| self.record(n))
    }

    pub fn x(&self, n: u64) -> Vector {
        Vector::from_raw(self.record(n).x.to_vec())
    }

    pub fn res_a(&self) -> &[f64] {
        &self.res_a
    }

    pub fn dist_p(&self) -> &[f64] {
        &self.dist_p
    }

    /// `max_i ‖x_n − T_i x_n‖`.
    pub fn max_res_t(&self, n: u64) -> f64 {
        self.record(n).res_t.iter().copied().fold(0.0, f64::max)
    }

    /// Least `n` with `res_A(n) ≤ eps`.
    pub fn first_hit_a(&self, eps: f64) -> Option<u64> {
        self.res_a.iter().position(|r| *r <= eps).map(|n| n as u64)
    }

    /// Least `n` with `max_i res_T[i](n) ≤ eps`.
    pub fn first_hit_t(&self, eps: f64) -> Option<u64> {
        (0..self.len()).find(|&n| self.max_res_t(n) <= eps)
    }

    #[cfg(test)]
    pub(crate) fn corrupt_res_a(&mut self, n: u64, value: f64) {
        self.res_a[n as usize] = value;
    }

    pub fn to_csv(&self) -> TraceCsv {
        let mut header = vec!["n".to_string(), "res_A".to_string()];
        header.extend((1..=self.n_maps).map(|i| format!("res_T_{i}")));
        header.push("dist_p".into());
        header.push("t_n".into());
        let rows = self
            .records()
            .map(|r| {
                let mut vals = Vec::with_capacity(self.n_maps + 3);
                vals.push(r.res_a);
                vals.extend_from_slice(r.res_t);
                vals.push(r.dist_p);
                vals.push(r.t);
                (r.n, vals)
            })
            .collect();
        TraceCsv { header, rows }
    }
}

/// Runs the parallel algorithm for `n_max` steps and records `n_max + 1`
/// entries.
pub fn iterate(inst: &ProblemInstance, n_max: u64) -> Result<Trace, EngineError> {
    let len = usize::try_from(n_max + 1).map_err(|_| EngineError::Overflow { n: n_max })?;
    let mut trace = Trace::with_capacity(inst.dim(), inst.n_maps(), len);
    let p = inst.fixed_point();
    let mut x = inst.x0().clone();
    for n in 0..=n_max {
        let weights = inst.mix().weights(n);
        let images = inst.images(&x);
        let ax = combine(&weights, &images);
        let t = inst.steps().t(n);
        trace.xs.extend_from_slice(x.coords());
        trace.res_a.push(x.distance(&ax)?);
        for img in &images {
            trace.res_t.push(x.distance(img)?);
        }
        trace.dist_p.push(x.distance(p)?);
        trace.t.push(t);
        trace.lambda.extend_from_slice(&weights);
        if n < n_max {
            x = x.blend(t, &ax)?;
            if !x.is_finite() {
                return Err(EngineError::Overflow { n: n + 1 });
            }
        }
    }
    Ok(trace)
}

/// Trace table as exported: `n, res_A, res_T_1 … res_T_N, dist_p, t_n`, every
/// real rendered with 17 significant digits so the text round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCsv {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<f64>)>,
}

fn render(x: f64) -> String {
    format!("{x:.16e}")
}

impl TraceCsv {
    pub fn write<W: Write>(&self, out: W) -> Result<(), EngineError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| EngineError::Csv(e.to_string());
        w.write_record(&self.header).map_err(csv_err)?;
        for (n, vals) in &self.rows {
            let mut rec = Vec::with_capacity(vals.len() + 1);
            rec.push(n.to_string());
            rec.extend(vals.iter().map(|v| render(*v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self, EngineError> {
        let mut r = csv::Reader::from_reader(input);
        let csv_err = |e: csv::Error| EngineError::Csv(e.to_string());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let mut fields = rec.iter();
            let n = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| EngineError::Csv(format!("bad index in row {}", rows.len())))?;
            let vals = fields
                .map(|f| f.parse::<f64>().map_err(|e| EngineError::Csv(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() + 1 != header.len() {
                return Err(EngineError::Csv(format!("row {n} has {} fields", vals.len() + 1)));
            }
            rows.push((n, vals));
        }
        Ok(TraceCsv { header, rows })
    }

    pub fn to_string(&self) -> Result<String, EngineError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| EngineError::Csv(e.to_string()))
    }
}

//! Time-series panel: ingestion, lagged design construction, scaling,
//! and the difference rank.
//!
//! A panel is an `n x t_max` matrix where row `i` is the time-series of
//! node `i`. Time indices are 0-based internally; file formats and the
//! intervention index in ITS specs follow 1-based convention and are
//! documented where they appear.

use std::io::BufRead;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::graph::{Graph, IdMap};

/// Dense `n x t_max` matrix of node time-series, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    n: usize,
    t_max: usize,
    values: Vec<f64>,
}

impl Panel {
    pub fn zeros(n: usize, t_max: usize) -> Panel {
        Panel { n, t_max, values: vec![0.0; n * t_max] }
    }

    /// Build from per-node rows. Rejects ragged rows and non-finite entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Panel> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("panel has no rows".into()));
        }
        let t_max = rows[0].len();
        if t_max == 0 {
            return Err(Error::InvalidInput("panel rows are empty".into()));
        }
        let n = rows.len();
        let mut values = Vec::with_capacity(n * t_max);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != t_max {
                return Err(Error::InvalidInput(format!(
                    "ragged panel: row {i} has {} values, expected {t_max}",
                    row.len()
                )));
            }
            for (t, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value at row {i}, column {t}"
                    )));
                }
            }
            values.extend_from_slice(&row);
        }
        Ok(Panel { n, t_max, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    #[inline]
    pub fn value(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.t_max + t]
    }

    #[inline]
    pub fn set(&mut self, i: usize, t: usize, v: f64) {
        self.values[i * self.t_max + t] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.t_max..(i + 1) * self.t_max]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.t_max..(i + 1) * self.t_max]
    }

    /// Copy of the columns in `range` as a new panel.
    pub fn slice_cols(&self, range: Range<usize>) -> Panel {
        assert!(range.start < range.end && range.end <= self.t_max);
        let t = range.len();
        let mut out = Panel::zeros(self.n, t);
        for i in 0..self.n {
            out.row_mut(i).copy_from_slice(&self.row(i)[range.clone()]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multiply every entry by `s` (returns a copy).
    pub fn scaled(&self, s: f64) -> Panel {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Min-max scale each node's row independently (see [`minmax_scale`]).
    pub fn scaled_rows_minmax(&self) -> Panel {
        let mut out = Panel::zeros(self.n, self.t_max);
        for i in 0..self.n {
            let scaled = minmax_scale(self.row(i)).expect("rows are non-empty");
            out.row_mut(i).copy_from_slice(&scaled);
        }
        out
    }
}

/// 1-based inclusive time window `[start, end]` over panel columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start: usize,
    pub end: usize,
}

impl TimeWindow {
    pub fn new(start: usize, end: usize) -> Result<TimeWindow> {
        if start < 1 || end < start {
            return Err(Error::InvalidSpec(format!(
                "time window [{start}, {end}] is empty or not 1-based"
            )));
        }
        Ok(TimeWindow { start, end })
    }

    pub fn check_against(&self, t_max: usize) -> Result<()> {
        if self.end > t_max {
            return Err(Error::InvalidSpec(format!(
                "time window [{}, {}] exceeds t_max={t_max}",
                self.start, self.end
            )));
        }
        Ok(())
    }

    fn as_range(&self) -> Range<usize> {
        (self.start - 1)..self.end
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Parse the panel CSV format: header `node,v1,...,vT`, one row per node
/// token. Returns (tokens in file order, parsed rows).
fn parse_panel_rows<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty panel CSV".into()))?;
    let header = header?;
    let cells: Vec<&str> = header.split(',').map(str::trim).collect();
    if cells.len() < 2 || cells[0] != "node" {
        return Err(Error::Parse {
            line: 1,
            msg: "panel header must be 'node,v1,...,vT'".into(),
        });
    }
    let t_max = cells.len() - 1;

    let mut tokens = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let token = cells[0].to_string();
        if token.is_empty() {
            return Err(Error::Parse { line: lineno, msg: "empty node token".into() });
        }
        if cells.len() - 1 != t_max {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "ragged row for node '{token}': {} values, expected {t_max}",
                    cells.len() - 1
                ),
            });
        }
        let mut row = Vec::with_capacity(t_max);
        for (c, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric cell '{cell}' for node '{token}', column {}", c + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value for node '{token}', column {}", c + 1),
                });
            }
            row.push(v);
        }
        tokens.push(token);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("panel CSV has no data rows".into()));
    }
    Ok((tokens, rows))
}

/// Load a panel whose node tokens must all resolve through `ids`.
/// Every mapped node must appear exactly once; output rows are ordered
/// by dense id.
pub fn load_panel_csv<R: BufRead>(reader: R, ids: &IdMap) -> Result<Panel> {
    let (tokens, rows) = parse_panel_rows(reader)?;
    let t_max = rows[0].len();
    let n = ids.len();
    let mut seen = vec![false; n];
    let mut values = vec![0.0; n * t_max];
    for (token, row) in tokens.iter().zip(rows) {
        let id = ids
            .id(token)
            .ok_or_else(|| Error::InvalidInput(format!("unknown node token '{token}'")))?;
        if seen[id] {
            return Err(Error::InvalidInput(format!("duplicate panel row for node '{token}'")));
        }
        seen[id] = true;
        values[id * t_max..(id + 1) * t_max].copy_from_slice(&row);
    }
    let missing: Vec<&str> = (0..n).filter(|&i| !seen[i]).map(|i| ids.token(i)).collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
        let suffix = if missing.len() > 10 { ", ..." } else { "" };
        return Err(Error::InvalidInput(format!(
            "panel is missing {} mapped node(s): {shown}{suffix}",
            missing.len()
        )));
    }
    Ok(Panel { n, t_max, values })
}

/// Load a panel with no pre-existing id mapping; dense ids are assigned
/// in file order. Used when no edge list accompanies the panel.
pub fn load_panel_csv_standalone<R: BufRead>(reader: R) -> Result<(Panel, IdMap)> {
    let (tokens, rows) = parse_panel_rows(reader)?;
    let mut ids = IdMap::default();
    for token in &tokens {
        if ids.id(token).is_some() {
            return Err(Error::InvalidInput(format!("duplicate panel row for node '{token}'")));
        }
        ids.intern(token);
    }
    let panel = Panel::from_rows(rows)?;
    Ok((panel, ids))
}

// ---------------------------------------------------------------------------
// Lagged design
// ---------------------------------------------------------------------------

/// Regression rows `(node, t, z, y)` with `y = X[i][t]` and regressors
/// `z = [X[i][t-w]]` or `[X[i][t-w], Xbar[i][t-w]]`, intercept column
/// appended last when enabled. Row order is node-major, then time.
/// `time` stores the 0-based response column index.
#[derive(Debug, Clone)]
pub struct LaggedDesign {
    n_nodes: usize,
    p: usize,
    lag: usize,
    with_peer: bool,
    with_intercept: bool,
    node: Vec<u32>,
    time: Vec<u32>,
    z: Vec<f64>,
    y: Vec<f64>,
}

impl LaggedDesign {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_regressors(&self) -> usize {
        self.p
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn with_peer(&self) -> bool {
        self.with_peer
    }

    pub fn with_intercept(&self) -> bool {
        self.with_intercept
    }

    pub fn row(&self, r: usize) -> (usize, usize, &[f64], f64) {
        (self.node[r] as usize, self.time[r] as usize, &self.z[r * self.p..(r + 1) * self.p], self.y[r])
    }

    pub(crate) fn node_ids(&self) -> &[u32] {
        &self.node
    }

    pub(crate) fn regressors(&self) -> &[f64] {
        &self.z
    }

    pub(crate) fn responses(&self) -> &[f64] {
        &self.y
    }
}

/// Construct the lagged design for lag `w`. Without peer regressors the
/// design has exactly `n * (t_max - w)` rows; with them, isolated nodes
/// contribute no rows (a structural zero peer mean would bias the peer
/// coefficient).
pub fn build_design(
    g: &Graph,
    panel: &Panel,
    lag: usize,
    with_peer: bool,
    with_intercept: bool,
) -> Result<LaggedDesign> {
    if panel.n() != g.n() {
        return Err(Error::Dimension(format!(
            "panel has {} rows, graph has {} nodes",
            panel.n(),
            g.n()
        )));
    }
    let t_max = panel.t_max();
    if lag == 0 || lag >= t_max {
        return Err(Error::InvalidSpec(format!("lag must satisfy 1 <= w < t_max (w={lag}, t_max={t_max})")));
    }
    let peer_means = if with_peer { Some(g.relational_mean(panel)?) } else { None };
    let p = 1 + usize::from(with_peer) + usize::from(with_intercept);
    let rows_per_node = t_max - lag;
    let mut design = LaggedDesign {
        n_nodes: g.n(),
        p,
        lag,
        with_peer,
        with_intercept,
        node: Vec::new(),
        time: Vec::new(),
        z: Vec::new(),
        y: Vec::new(),
    };
    for i in 0..g.n() {
        if with_peer && g.degree(i) == 0 {
            continue;
        }
        design.node.reserve(rows_per_node);
        for t in lag..t_max {
            design.node.push(i as u32);
            design.time.push(t as u32);
            design.z.push(panel.value(i, t - lag));
            if let Some(means) = &peer_means {
                design.z.push(means.value(i, t - lag));
            }
            if with_intercept {
                design.z.push(1.0);
            }
            design.y.push(panel.value(i, t));
        }
    }
    Ok(design)
}

// ---------------------------------------------------------------------------
// Scaling and difference rank
// ---------------------------------------------------------------------------

/// `(x - min(x)) / (max(x) - min(x))`; a constant series maps to all
/// zeros so downstream pipelines never see NaN.
pub fn minmax_scale(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("cannot scale an empty series".into()));
    }
    let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if span == 0.0 {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|v| (v - min) / span).collect())
}

/// Per-node max-minus-min over the whole series, or over a restricted
/// window when given.
pub fn difference_rank(panel: &Panel, window: Option<TimeWindow>) -> Result<Vec<f64>> {
    let range = match window {
        Some(w) => {
            w.check_against(panel.t_max())?;
            w.as_range()
        }
        None => 0..panel.t_max(),
    };
    let mut out = Vec::with_capacity(panel.n());
    for i in 0..panel.n() {
        let row = &panel.row(i)[range.clone()];
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.push(max - min);
    }
    Ok(out)
}

/// Ids of the `k` nodes with the largest rank values, descending; ties
/// broken by ascending node id.
pub fn top_k_by_rank(d: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > d.len() {
        return Err(Error::InvalidSpec(format!("k={k} out of range 1..={}", d.len())));
    }
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn path_graph(n: usize) -> Graph {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, edges).0
    }

    #[test]
    fn from_rows_rejects_ragged_and_nonfinite() {
        assert!(Panel::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Panel::from_rows(vec![vec![1.0, f64::NAN]]).is_err());
        assert!(Panel::from_rows(vec![]).is_err());
    }

    #[test]
    fn load_panel_csv_well_formed() {
        let edges = "a b\nb c\n";
        let (_, ids, _) = crate::graph::load_edge_list(edges.as_bytes()).unwrap();
        let csv = "node,v1,v2,v3,v4\na,1,2,3,4\nb,5,6,7,8\nc,9,10,11,12\n";
        let p = load_panel_csv(csv.as_bytes(), &ids).unwrap();
        assert_eq!((p.n(), p.t_max()), (3, 4));
        assert_eq!(p.row(ids.id("b").unwrap()), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn load_panel_csv_ragged_row_names_node() {
        let edges = "a b\nb c\n";
        let (_, ids, _) = crate::graph::load_edge_list(edges.as_bytes()).unwrap();
        let csv = "node,v1,v2,v3,v4\na,1,2,3,4\nb,5,6,7\nc,9,10,11,12\n";
        let err = load_panel_csv(csv.as_bytes(), &ids).unwrap_err();
        assert!(err.to_string().contains("'b'"), "{err}");
    }

    #[test]
    fn load_panel_csv_missing_node() {
        let edges = "a b\nb c\n";
        let (_, ids, _) = crate::graph::load_edge_list(edges.as_bytes()).unwrap();
        let csv = "node,v1,v2\na,1,2\nb,3,4\n";
        let err = load_panel_csv(csv.as_bytes(), &ids).unwrap_err();
        assert!(err.to_string().contains('c'), "{err}");
    }

    #[test]
    fn load_panel_csv_unknown_token() {
        let edges = "a b\n";
        let (_, ids, _) = crate::graph::load_edge_list(edges.as_bytes()).unwrap();
        let csv = "node,v1\na,1\nb,2\nzz,3\n";
        let err = load_panel_csv(csv.as_bytes(), &ids).unwrap_err();
        assert!(err.to_string().contains("zz"), "{err}");
    }

    #[test]
    fn standalone_loader_assigns_file_order() {
        let csv = "node,v1,v2\nx,1,2\ny,3,4\n";
        let (p, ids) = load_panel_csv_standalone(csv.as_bytes()).unwrap();
        assert_eq!(ids.id("x"), Some(0));
        assert_eq!(ids.id("y"), Some(1));
        assert_eq!(p.value(1, 0), 3.0);
    }

    #[test]
    fn build_design_no_peer_counts_and_rows() {
        // n=2 path, t_max=3, w=1 -> 4 rows; node0,t=2 (1-based) is
        // (z=[X_{0,1}], y=X_{0,2}).
        let g = path_graph(2);
        let p = Panel::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let d = build_design(&g, &p, 1, false, false).unwrap();
        assert_eq!(d.len(), 4);
        let (node, t, z, y) = d.row(0);
        assert_eq!((node, t), (0, 1));
        assert_eq!(z, &[1.0]);
        assert_eq!(y, 2.0);
    }

    #[test]
    fn build_design_peer_adds_neighbor_mean() {
        let g = path_graph(2);
        let p = Panel::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let d = build_design(&g, &p, 1, true, false).unwrap();
        // node 0 has single neighbor 1: peer regressor is node 1's lagged value
        let (_, _, z, _) = d.row(0);
        assert_eq!(z, &[1.0, 4.0]);
    }

    #[test]
    fn build_design_boundary_lag() {
        // w = t_max - 1 -> exactly n rows
        let g = path_graph(3);
        let p = Panel::from_rows(vec![vec![1.0, 2.0, 3.0]; 3]).unwrap();
        let d = build_design(&g, &p, 2, false, false).unwrap();
        assert_eq!(d.len(), 3);
        assert!(build_design(&g, &p, 3, false, false).is_err());
    }

    #[test]
    fn build_design_peer_skips_isolated() {
        // two nodes joined, one isolated
        let (g, _) = Graph::from_edges(3, vec![(0, 1)]);
        let p = Panel::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let d = build_design(&g, &p, 1, true, false).unwrap();
        assert_eq!(d.len(), 2); // (3 - 1 isolated) * (2 - 1)
        let d = build_design(&g, &p, 1, false, false).unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn design_rows_reconstruct_panel() {
        let g = path_graph(4);
        let rows: Vec<Vec<f64>> =
            (0..4).map(|i| (0..6).map(|t| (i * 7 + t * 3) as f64).collect()).collect();
        let p = Panel::from_rows(rows).unwrap();
        let d = build_design(&g, &p, 2, true, true).unwrap();
        for r in 0..d.len() {
            let (i, t, z, y) = d.row(r);
            assert_eq!(y, p.value(i, t));
            assert_eq!(z[0], p.value(i, t - 2));
            assert_eq!(z[2], 1.0);
        }
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_scale(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_scale(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(minmax_scale(&[-1.0, 0.0, 3.0]).unwrap(), vec![0.0, 0.25, 1.0]);
        assert!(minmax_scale(&[]).is_err());
    }

    #[test]
    fn minmax_idempotent_on_unit_span() {
        let s = vec![0.0, 0.25, 0.7, 1.0];
        assert_eq!(minmax_scale(&s).unwrap(), s);
    }

    #[test]
    fn difference_rank_examples() {
        let p = Panel::from_rows(vec![vec![1.0, 5.0, 2.0]]).unwrap();
        assert_eq!(difference_rank(&p, None).unwrap(), vec![4.0]);

        let p = Panel::from_rows(vec![vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(difference_rank(&p, None).unwrap(), vec![0.0]);

        let p = Panel::from_rows(vec![vec![0.0, 9.0, 1.0, 3.0]]).unwrap();
        let w = TimeWindow::new(3, 4).unwrap();
        assert_eq!(difference_rank(&p, Some(w)).unwrap(), vec![2.0]);
    }

    #[test]
    fn difference_rank_window_validation() {
        let p = Panel::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(TimeWindow::new(2, 1).is_err());
        assert!(TimeWindow::new(0, 1).is_err());
        let w = TimeWindow::new(1, 3).unwrap();
        assert!(difference_rank(&p, Some(w)).is_err());
    }

    #[test]
    fn top_k_tie_break() {
        assert_eq!(top_k_by_rank(&[3.0, 1.0, 3.0], 2).unwrap(), vec![0, 2]);
        let all = top_k_by_rank(&[1.0, 3.0, 2.0], 3).unwrap();
        assert_eq!(all, vec![1, 2, 0]);
        assert!(top_k_by_rank(&[1.0], 2).is_err());
        assert!(top_k_by_rank(&[1.0], 0).is_err());
    }
}

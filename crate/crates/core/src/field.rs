/// What a [`SpaceTimeField`] holds and in which unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// veh/hr
    Flow,
    /// vehicles per interval
    Count,
    /// mph
    Speed,
    /// veh/mi
    Density,
    /// hours
    TravelTime,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Flow => "flow",
            FieldKind::Count => "count",
            FieldKind::Speed => "speed",
            FieldKind::Density => "density",
            FieldKind::TravelTime => "travel_time",
        }
    }

    /// Whether `v` is admissible for this kind.
    pub fn admits(self, v: f64) -> bool {
        match self {
            FieldKind::Speed | FieldKind::TravelTime => v.is_finite() && v > 0.0,
            FieldKind::Flow | FieldKind::Count | FieldKind::Density => v.is_finite() && v >= 0.0,
        }
    }
}

/// Dense `(point, interval)` matrix with a missing-value mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    kind: FieldKind,
    n_points: usize,
    n_intervals: usize,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl SpaceTimeField {
    /// A field with every entry missing.
    pub fn masked(kind: FieldKind, n_points: usize, n_intervals: usize) -> Self {
        Self {
            kind,
            n_points,
            n_intervals,
            values: vec![0.0; n_points * n_intervals],
            present: vec![false; n_points * n_intervals],
        }
    }

    pub fn filled(kind: FieldKind, n_points: usize, n_intervals: usize, value: f64) -> Self {
        Self {
            kind,
            n_points,
            n_intervals,
            values: vec![value; n_points * n_intervals],
            present: vec![true; n_points * n_intervals],
        }
    }

    /// Builds a field from rows indexed by point, `None` meaning missing.
    pub fn from_rows(kind: FieldKind, rows: &[Vec<Option<f64>>]) -> Self {
        let n_points = rows.len();
        let n_intervals = rows.first().map_or(0, Vec::len);
        let mut f = Self::masked(kind, n_points, n_intervals);
        for (p, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_intervals, "ragged rows");
            for (i, v) in row.iter().enumerate() {
                f.put(p, i, *v);
            }
        }
        f
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    #[inline]
    fn idx(&self, p: usize, i: usize) -> usize {
        debug_assert!(p < self.n_points && i < self.n_intervals);
        p * self.n_intervals + i
    }

    #[inline]
    pub fn get(&self, p: usize, i: usize) -> Option<f64> {
        let k = self.idx(p, i);
        self.present[k].then(|| self.values[k])
    }

    #[inline]
    pub fn set(&mut self, p: usize, i: usize, v: f64) {
        let k = self.idx(p, i);
        self.values[k] = v;
        self.present[k] = true;
    }

    pub fn clear(&mut self, p: usize, i: usize) {
        let k = self.idx(p, i);
        self.values[k] = 0.0;
        self.present[k] = false;
    }

    pub fn put(&mut self, p: usize, i: usize, v: Option<f64>) {
        match v {
            Some(v) => self.set(p, i, v),
            None => self.clear(p, i),
        }
    }

    pub fn row(&self, p: usize) -> Vec<Option<f64>> {
        (0..self.n_intervals).map(|i| self.get(p, i)).collect()
    }

    pub fn is_present(&self, p: usize, i: usize) -> bool {
        self.present[self.idx(p, i)]
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&b| b).count()
    }

    pub fn is_fully_masked(&self) -> bool {
        !self.present.iter().any(|&b| b)
    }

    /// Present entries as `(point, interval, value)` in row-major order.
    pub fn iter_present(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_points).flat_map(move |p| {
            (0..self.n_intervals).filter_map(move |i| self.get(p, i).map(|v| (p, i, v)))
        })
    }

    /// Applies `f` to every present value, producing a field of `kind`.
    pub fn map(&self, kind: FieldKind, f: impl Fn(f64) -> f64) -> Self {
        let mut out = Self::masked(kind, self.n_points, self.n_intervals);
        for (p, i, v) in self.iter_present() {
            out.set(p, i, f(v));
        }
        out
    }

    /// Entries that violate the kind's admissible range.
    pub fn invalid_entries(&self) -> Vec<(usize, usize, f64)> {
        self.iter_present()
            .filter(|&(_, _, v)| !self.kind.admits(v))
            .collect()
    }
}

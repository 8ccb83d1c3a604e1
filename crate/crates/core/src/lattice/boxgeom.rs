/// The box `[-M, M]^d` of `Z^d` with lexicographic vertex indexing
/// (coordinate 0 most significant) and canonical nearest-neighbour edge ids.
///
/// Edge ids are grouped by axis: edge `(v, a)` joins `v` and `v + e_a` and is
/// only present when `v_a < M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxGeometry {
    d: usize,
    half_width: i32,
    side: usize,
    vertex_count: usize,
    edges_per_axis: usize,
}

impl BoxGeometry {
    pub fn new(d: usize, half_width: i32) -> Self {
        assert!(d >= 1 && half_width >= 1);
        let side = 2 * half_width as usize + 1;
        let vertex_count = side.pow(d as u32);
        let edges_per_axis = (side - 1) * side.pow(d as u32 - 1);
        Self {
            d,
            half_width,
            side,
            vertex_count,
            edges_per_axis,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.d * self.edges_per_axis
    }

    pub fn contains(&self, c: &[i32]) -> bool {
        c.iter().all(|&x| x.abs() <= self.half_width)
    }

    /// True when `c` lies on the outer face of the box.
    pub fn on_face(&self, c: &[i32]) -> bool {
        c.iter().any(|&x| x.abs() == self.half_width)
    }

    pub fn index(&self, c: &[i32]) -> Option<usize> {
        debug_assert_eq!(c.len(), self.d);
        let mut idx = 0usize;
        for &x in c {
            if x.abs() > self.half_width {
                return None;
            }
            idx = idx * self.side + (x + self.half_width) as usize;
        }
        Some(idx)
    }

    pub fn coord_into(&self, mut idx: usize, out: &mut [i32]) {
        for slot in out.iter_mut().rev() {
            *slot = (idx % self.side) as i32 - self.half_width;
            idx /= self.side;
        }
    }

    /// Id of the edge from `c` to `c + e_axis`, if both ends are in the box.
    pub fn edge_id(&self, c: &[i32], axis: usize) -> Option<usize> {
        if !self.contains(c) || c[axis] >= self.half_width {
            return None;
        }
        let mut id = 0usize;
        for (i, &x) in c.iter().enumerate() {
            let radix = if i == axis { self.side - 1 } else { self.side };
            id = id * radix + (x + self.half_width) as usize;
        }
        Some(axis * self.edges_per_axis + id)
    }

    /// Lower endpoint and axis of an edge id.
    pub fn edge_endpoint(&self, mut id: usize, out: &mut [i32]) -> usize {
        let axis = id / self.edges_per_axis;
        id %= self.edges_per_axis;
        for (i, slot) in out.iter_mut().enumerate().rev() {
            let radix = if i == axis { self.side - 1 } else { self.side };
            *slot = (id % radix) as i32 - self.half_width;
            id /= radix;
        }
        axis
    }
}

/// Visit every integer point of the axis-aligned box `[lo, hi]` in
/// lexicographic order.
pub fn for_each_point(lo: &[i32], hi: &[i32], mut f: impl FnMut(&[i32])) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        f(&cur);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = lo[i];
        }
    }
}

use crate::mesh::Point;

/// A smooth three-component field `(E1, E2, H)` with analytic curls.
pub trait AnalyticField: Sync {
    fn value(&self, p: Point) -> [f64; 3];

    /// `(curl E, dH/dy, -dH/dx)`, the scalar curl of `E` followed by the
    /// vector curl of `H`.
    fn curl(&self, p: Point) -> [f64; 3];
}

/// Eigenfunction `(l, m)` of the square cavity `(0, pi)^2` with
/// `eps = mu = 1`, in the real formulation `curl E = w H`, `curl H = w E`:
///
/// `H = cos(lx) cos(my)`, `E = curl H / w`, `w = sqrt(l^2 + m^2)`.
///
/// The mode with negative frequency is `(E, -H)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareMode {
    pub l: u32,
    pub m: u32,
    pub negative: bool,
}

impl SquareMode {
    pub fn new(l: u32, m: u32) -> Self {
        assert!(l + m > 0, "the (0, 0) pair carries no nonzero frequency");
        SquareMode {
            l,
            m,
            negative: false,
        }
    }

    pub fn omega(&self) -> f64 {
        let w = f64::from(self.l * self.l + self.m * self.m).sqrt();
        if self.negative {
            -w
        } else {
            w
        }
    }
}

impl AnalyticField for SquareMode {
    fn value(&self, p: Point) -> [f64; 3] {
        let (l, m) = (f64::from(self.l), f64::from(self.m));
        let w = self.omega().abs();
        let (cx, sx) = ((l * p[0]).cos(), (l * p[0]).sin());
        let (cy, sy) = ((m * p[1]).cos(), (m * p[1]).sin());
        let h = cx * cy;
        let s = if self.negative { -1.0 } else { 1.0 };
        [-m * cx * sy / w, l * sx * cy / w, s * h]
    }

    fn curl(&self, p: Point) -> [f64; 3] {
        let (l, m) = (f64::from(self.l), f64::from(self.m));
        let w = self.omega().abs();
        let (cx, sx) = ((l * p[0]).cos(), (l * p[0]).sin());
        let (cy, sy) = ((m * p[1]).cos(), (m * p[1]).sin());
        let s = if self.negative { -1.0 } else { 1.0 };
        // curl E = w H, curl H = (dH/dy, -dH/dx) = w E
        [w * cx * cy, s * (-m * cx * sy), s * (l * sx * cy)]
    }
}

/// Constant field; all curls vanish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantField(pub [f64; 3]);

impl AnalyticField for ConstantField {
    fn value(&self, _: Point) -> [f64; 3] {
        self.0
    }

    fn curl(&self, _: Point) -> [f64; 3] {
        [0.0; 3]
    }
}

/// Field given by two closures for the value and the curl.
pub struct FnField<V, C> {
    pub value: V,
    pub curl: C,
}

impl<V, C> AnalyticField for FnField<V, C>
where
    V: Fn(Point) -> [f64; 3] + Sync,
    C: Fn(Point) -> [f64; 3] + Sync,
{
    fn value(&self, p: Point) -> [f64; 3] {
        (self.value)(p)
    }

    fn curl(&self, p: Point) -> [f64; 3] {
        (self.curl)(p)
    }
}

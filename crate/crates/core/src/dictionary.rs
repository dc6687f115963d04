//! Monomial observables: lifting, analytic gradients and projection.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::State;

/// A finite set of scalar observables over an `n`-dimensional state.
pub trait Dictionary: Sync {
    fn state_dim(&self) -> usize;

    /// Number of observables `N`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lift_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes the `N x state_dim` Jacobian, row-major.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    /// Lifts every column of `states` (`state_dim x d`) into an `N x d` matrix.
    fn lift_columns(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, states.ncols());
        let mut buf = vec![0.0; n];
        for (j, col) in states.column_iter().enumerate() {
            let x: Vec<f64> = col.iter().copied().collect();
            self.lift_into(&x, &mut buf);
            out.column_mut(j).copy_from_slice(&buf);
        }
        out
    }
}

/// Products of nonnegative integer powers of the state variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomials {
    nvars: usize,
    exponents: Vec<Vec<u32>>,
    max_power: Vec<u32>,
}

impl Monomials {
    pub fn new(nvars: usize, exponents: Vec<Vec<u32>>) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::invalid("monomials need at least one variable"));
        }
        if exponents.is_empty() {
            return Err(Error::invalid("monomial set is empty"));
        }
        let mut seen = HashSet::new();
        for e in &exponents {
            if e.len() != nvars {
                return Err(Error::invalid(format!(
                    "exponent vector {e:?} does not have {nvars} entries"
                )));
            }
            if !seen.insert(e.clone()) {
                return Err(Error::invalid(format!("duplicate monomial {e:?}")));
            }
        }
        let max_power = (0..nvars)
            .map(|i| exponents.iter().map(|e| e[i]).max().unwrap_or(0))
            .collect();
        Ok(Self {
            nvars,
            exponents,
            max_power,
        })
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Position of the monomial with the given exponents, if present.
    pub fn index_of(&self, e: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|x| x.as_slice() == e)
    }

    fn power_table(&self, x: &[f64]) -> Vec<Vec<f64>> {
        x.iter()
            .zip(&self.max_power)
            .map(|(&xi, &p)| {
                let mut row = Vec::with_capacity(p as usize + 1);
                let mut acc = 1.0;
                row.push(acc);
                for _ in 0..p {
                    acc *= xi;
                    row.push(acc);
                }
                row
            })
            .collect()
    }
}

impl Dictionary for Monomials {
    fn state_dim(&self) -> usize {
        self.nvars
    }

    fn len(&self) -> usize {
        self.exponents.len()
    }

    fn lift_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nvars);
        let pw = self.power_table(x);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e
                .iter()
                .enumerate()
                .map(|(i, &k)| pw[i][k as usize])
                .product();
        }
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.nvars;
        let pw = self.power_table(x);
        for (j, e) in self.exponents.iter().enumerate() {
            for i in 0..n {
                let slot = &mut out[j * n + i];
                if e[i] == 0 {
                    *slot = 0.0;
                    continue;
                }
                let mut d = e[i] as f64 * pw[i][e[i] as usize - 1];
                for (k, &p) in e.iter().enumerate() {
                    if k != i {
                        d *= pw[k][p as usize];
                    }
                }
                *slot = d;
            }
        }
    }
}

/// The three named observable sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// All monomials of total degree at most 7.
    O120,
    /// `x1` and `x2` at most linear, `theta` up to degree 7.
    O32,
    /// Powers of `theta` plus `x1`, `x2`, `x1 x2`; no position-orientation products.
    O11,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::O120, Preset::O32, Preset::O11];
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O120" | "o120" => Ok(Preset::O120),
            "O32" | "o32" => Ok(Preset::O32),
            "O11" | "o11" => Ok(Preset::O11),
            other => Err(Error::invalid(format!(
                "unknown observable set `{other}` (expected O120, O32 or O11)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Preset::O120 => "O120",
            Preset::O32 => "O32",
            Preset::O11 => "O11",
        };
        f.write_str(name)
    }
}

pub type Triplet = [u32; 3];

fn graded_lex(mut t: Vec<Triplet>) -> Vec<Triplet> {
    t.sort_by_key(|&[a, b, c]| (a + b + c, a, b, c));
    t
}

/// Ordered monomials in `(x1, x2, theta)` used to lift robot poses.
///
/// Always contains the constant and the three coordinate functions, so that
/// [`ObservableSet::project`] is a left inverse of [`ObservableSet::lift`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Triplet>", into = "Vec<Triplet>")]
pub struct ObservableSet {
    triplets: Vec<Triplet>,
    monomials: Monomials,
    coord_indices: [usize; 3],
    constant_index: usize,
}

impl ObservableSet {
    /// Builds a set from explicit triplets; the order given is kept.
    pub fn from_triplets(triplets: Vec<Triplet>) -> Result<Self> {
        let monomials = Monomials::new(3, triplets.iter().map(|t| t.to_vec()).collect())?;
        let find = |t: Triplet, what: &str| {
            monomials.index_of(&t).ok_or_else(|| {
                Error::invalid(format!("observable set must contain the {what} monomial {t:?}"))
            })
        };
        let coord_indices = [
            find([1, 0, 0], "x1")?,
            find([0, 1, 0], "x2")?,
            find([0, 0, 1], "theta")?,
        ];
        let constant_index = find([0, 0, 0], "constant")?;
        Ok(Self {
            triplets,
            monomials,
            coord_indices,
            constant_index,
        })
    }

    pub fn preset(p: Preset) -> Self {
        let triplets = match p {
            Preset::O120 => {
                let mut t = Vec::new();
                for a in 0..=7 {
                    for b in 0..=(7 - a) {
                        for c in 0..=(7 - a - b) {
                            t.push([a, b, c]);
                        }
                    }
                }
                graded_lex(t)
            }
            Preset::O32 => {
                let mut t = Vec::new();
                for a in 0..=1 {
                    for b in 0..=1 {
                        for c in 0..=7 {
                            t.push([a, b, c]);
                        }
                    }
                }
                graded_lex(t)
            }
            Preset::O11 => {
                let mut t: Vec<Triplet> = (0..=7).map(|c| [0, 0, c]).collect();
                t.extend([[1, 0, 0], [0, 1, 0], [1, 1, 0]]);
                t
            }
        };
        Self::from_triplets(triplets).expect("presets are valid")
    }

    pub fn preset_by_name(name: &str) -> Result<Self> {
        Ok(Self::preset(name.parse()?))
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn coord_indices(&self) -> [usize; 3] {
        self.coord_indices
    }

    pub fn constant_index(&self) -> usize {
        self.constant_index
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn lift(&self, s: &State) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        self.monomials
            .lift_into(&s.to_array(), out.as_mut_slice());
        out
    }

    /// `N x 3` matrix whose row `j` is the gradient of observable `j`.
    pub fn lift_gradient(&self, s: &State) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.len() * 3];
        self.monomials.gradient_into(&s.to_array(), &mut buf);
        DMatrix::from_row_slice(self.len(), 3, &buf)
    }

    /// Lifts a list of states into the `N x d` data matrix.
    pub fn lift_states(&self, states: &[State]) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, states.len());
        for (j, s) in states.iter().enumerate() {
            let mut col = out.column_mut(j);
            self.monomials.lift_into(&s.to_array(), col.as_mut_slice());
        }
        out
    }

    /// Reads the coordinate observables out of a lifted vector.
    pub fn project(&self, z: &[f64]) -> Result<State> {
        if z.len() != self.len() {
            return Err(Error::invalid(format!(
                "lifted vector has length {}, observable set has {}",
                z.len(),
                self.len()
            )));
        }
        let [i, j, k] = self.coord_indices;
        Ok(State::new(z[i], z[j], z[k]))
    }
}

impl Dictionary for ObservableSet {
    fn state_dim(&self) -> usize {
        3
    }

    fn len(&self) -> usize {
        self.triplets.len()
    }

    fn lift_into(&self, x: &[f64], out: &mut [f64]) {
        self.monomials.lift_into(x, out)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.monomials.gradient_into(x, out)
    }
}

impl TryFrom<Vec<Triplet>> for ObservableSet {
    type Error = Error;

    fn try_from(t: Vec<Triplet>) -> Result<Self> {
        Self::from_triplets(t)
    }
}

impl From<ObservableSet> for Vec<Triplet> {
    fn from(o: ObservableSet) -> Self {
        o.triplets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn preset_counts() {
        assert_eq!(ObservableSet::preset(Preset::O120).len(), 120);
        assert_eq!(ObservableSet::preset(Preset::O32).len(), 32);
        assert_eq!(ObservableSet::preset(Preset::O11).len(), 11);
    }

    #[test]
    fn unknown_preset_name() {
        assert!(matches!(
            ObservableSet::preset_by_name("O7"),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn graded_lex_order() {
        let o = ObservableSet::preset(Preset::O120);
        let t = o.triplets();
        assert_eq!(t[0], [0, 0, 0]);
        assert_eq!(&t[1..4], &[[0, 0, 1], [0, 1, 0], [1, 0, 0]]);
        assert!(t.windows(2).all(|w| {
            let k = |&[a, b, c]: &Triplet| (a + b + c, a, b, c);
            k(&w[0]) < k(&w[1])
        }));
    }

    #[test]
    fn lift_o11_example() {
        let o = ObservableSet::preset(Preset::O11);
        let z = o.lift(&State::new(0.5, -0.2, 0.0));
        let expected = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, -0.2, -0.1];
        assert_eq!(z.as_slice(), &expected);
    }

    #[test]
    fn lift_zero_and_ones() {
        for p in Preset::ALL {
            let o = ObservableSet::preset(p);
            let z = o.lift(&State::default());
            for (j, v) in z.iter().enumerate() {
                assert_eq!(*v, if j == o.constant_index() { 1.0 } else { 0.0 });
            }
        }
        let z = ObservableSet::preset(Preset::O120).lift(&State::new(1.0, 1.0, 1.0));
        assert!(z.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gradient_examples() {
        let o = ObservableSet::from_triplets(vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]])
            .unwrap();
        let g = o.lift_gradient(&State::new(2.0, 3.0, 0.0));
        assert_eq!(g.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert_eq!(g.row(4).iter().copied().collect::<Vec<_>>(), vec![3.0, 2.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for p in Preset::ALL {
            let o = ObservableSet::preset(p);
            for _ in 0..100 {
                let s = State::new(
                    rng.random_range(0.0..1.5),
                    rng.random_range(-0.75..0.75),
                    rng.random_range(-PI..PI),
                );
                let g = o.lift_gradient(&s);
                for axis in 0..3 {
                    let mut plus = s.to_array();
                    let mut minus = s.to_array();
                    plus[axis] += h;
                    minus[axis] -= h;
                    let fd = (o.lift(&State::from_array(plus)) - o.lift(&State::from_array(minus))) / (2.0 * h);
                    for j in 0..o.len() {
                        let exact = g[(j, axis)];
                        let scale = exact.abs().max(1.0);
                        assert!(
                            (fd[j] - exact).abs() <= 1e-6 * scale,
                            "{p} row {j} axis {axis}: fd {} vs {}",
                            fd[j],
                            exact
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn project_examples() {
        let o = ObservableSet::preset(Preset::O120);
        assert_eq!(o.project(&vec![0.0; 120]).unwrap(), State::default());
        let corner = State::new(1.5, -0.75, PI);
        assert_eq!(o.project(o.lift(&corner).as_slice()).unwrap(), corner);
        assert!(o.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ObservableSet::from_triplets(vec![[0, 0, 0], [1, 0, 0], [0, 1, 0]]).is_err());
        assert!(ObservableSet::from_triplets(vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]]).is_err());
        assert!(
            ObservableSet::from_triplets(vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 0]])
                .is_err()
        );
    }

    #[test]
    fn serde_round_trip_keeps_order() {
        let o = ObservableSet::preset(Preset::O11);
        let json = serde_json::to_string(&o).unwrap();
        let back: ObservableSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, o);
    }

    proptest! {
        #[test]
        fn project_is_left_inverse(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, th in -10.0f64..10.0) {
            for p in Preset::ALL {
                let o = ObservableSet::preset(p);
                let s = State::new(x1, x2, th);
                prop_assert_eq!(o.project(o.lift(&s).as_slice()).unwrap(), s);
            }
        }

        #[test]
        fn position_enters_affinely(
            x1 in -2.0f64..2.0, x2 in -2.0f64..2.0, th in -3.0f64..3.0, t in -1.0f64..1.0,
        ) {
            for p in [Preset::O11, Preset::O32] {
                let o = ObservableSet::preset(p);
                let at = |s: f64| o.lift(&State::new(x1 + s * t, x2, th));
                let second_difference = at(2.0) - at(1.0) * 2.0 + at(0.0);
                prop_assert!(second_difference.amax() <= 1e-9 * at(2.0).amax().max(1.0));
            }
        }
    }
}

//! Built-in systems and polynomial vector fields.
//!
//! Every builtin is a family of global polynomial fields with analytic
//! Jacobians: the Heisenberg and Grushin systems, commuting constants, the
//! affine family x ↦ L x + a_α on a truncated l1 chart, and operator families
//! x ↦ Φ(x)·a_α with a polynomial operator Φ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldFamily, VectorField};
use crate::space::{Ball, ChartSpace, Point};

pub const BUILTINS: &[(&str, &str)] = &[
    ("heisenberg", "X1 = d/dx, X2 = d/dy + x d/dz on R^3"),
    ("grushin", "X1 = d/dx, X2 = x d/dy on R^2"),
    ("commuting-constants", "constant unit fields e_0..e_{span-1} on R^dim"),
    ("affine-l1", "X_a(x) = L x + decay^a e_a on a truncated l1 chart, L = identity or zero"),
    ("operator-family", "X_a(x) = Phi(x) a_a with a polynomial operator Phi"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn constant(c: f64, dim: usize) -> Self {
        Self {
            terms: vec![Monomial {
                coeff: c,
                powers: vec![0; dim],
            }],
        }
    }

    /// c · x_i
    pub fn linear(c: f64, i: usize, dim: usize) -> Self {
        let mut powers = vec![0; dim];
        powers[i] = 1;
        Self {
            terms: vec![Monomial { coeff: c, powers }],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                m.powers
                    .iter()
                    .zip(x)
                    .fold(m.coeff, |acc, (&p, &xi)| if p == 0 { acc } else { acc * xi.powi(p as i32) })
            })
            .sum()
    }

    pub fn partial(&self, x: &[f64], j: usize) -> f64 {
        self.terms
            .iter()
            .filter(|m| m.powers[j] > 0)
            .map(|m| {
                m.powers.iter().zip(x).enumerate().fold(m.coeff, |acc, (i, (&p, &xi))| {
                    if i == j {
                        acc * p as f64 * xi.powi(p as i32 - 1)
                    } else if p == 0 {
                        acc
                    } else {
                        acc * xi.powi(p as i32)
                    }
                })
            })
            .sum()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        for m in &self.terms {
            if m.powers.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.powers.len(),
                });
            }
        }
        Ok(())
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    coeff: m.coeff * c,
                    powers: m.powers.clone(),
                })
                .collect(),
        }
    }
}

/// Global polynomial field with its analytic Jacobian.
pub fn polynomial_field(space: &ChartSpace, label: &str, components: Vec<Polynomial>) -> Result<VectorField> {
    let dim = space.dimension();
    if components.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: components.len(),
        });
    }
    for c in &components {
        c.check_dim(dim)?;
    }
    let comps = std::sync::Arc::new(components);
    let for_jac = comps.clone();
    Ok(VectorField::new(label, Ball::whole(space), move |x: &Point| {
        DVector::from_iterator(dim, comps.iter().map(|p| p.eval(x.as_slice())))
    })
    .with_jacobian(move |x: &Point| {
        DMatrix::from_fn(dim, dim, |i, j| for_jac[i].partial(x.as_slice(), j))
    }))
}

pub fn constant_field(space: &ChartSpace, label: &str, value: Point) -> VectorField {
    let dim = space.dimension();
    VectorField::new(label, Ball::whole(space), move |_: &Point| value.clone())
        .with_jacobian(move |_: &Point| DMatrix::zeros(dim, dim))
}

pub fn unit_field(space: &ChartSpace, label: &str, axis: usize) -> VectorField {
    let mut e = Point::zeros(space.dimension());
    e[axis] = 1.0;
    constant_field(space, label, e)
}

/// X1 = ∂x, X2 = ∂y + x∂z on R³.
pub fn heisenberg() -> FieldFamily {
    let s = ChartSpace::euclidean(3);
    let x2 = VectorField::new("X2", Ball::whole(&s), |p: &Point| Point::from_vec(vec![0.0, 1.0, p[0]]))
        .with_jacobian(|_: &Point| {
            let mut j = DMatrix::zeros(3, 3);
            j[(2, 0)] = 1.0;
            j
        });
    FieldFamily::new(s.clone(), vec![unit_field(&s, "X1", 0), x2]).expect("heisenberg family")
}

/// Heisenberg generators plus X3 = ∂z, which closes the bracket relations.
pub fn heisenberg_with_center() -> FieldFamily {
    let mut fam = heisenberg();
    let s = fam.space().clone();
    fam.push(unit_field(&s, "X3", 2)).expect("same chart");
    fam
}

/// X1 = ∂x, X2 = x∂y on R².
pub fn grushin() -> FieldFamily {
    let s = ChartSpace::euclidean(2);
    let x2 = VectorField::new("X2", Ball::whole(&s), |p: &Point| Point::from_vec(vec![0.0, p[0]])).with_jacobian(
        |_: &Point| {
            let mut j = DMatrix::zeros(2, 2);
            j[(1, 0)] = 1.0;
            j
        },
    );
    FieldFamily::new(s.clone(), vec![unit_field(&s, "X1", 0), x2]).expect("grushin family")
}

/// Constant unit fields e_0, …, e_{span-1} on R^dim.
pub fn commuting_constants(dim: usize, span: usize) -> Result<FieldFamily> {
    if span > dim || span == 0 {
        return Err(Error::InvalidArgument(format!(
            "commuting-constants needs 1 <= span <= dim, got span {span}, dim {dim}"
        )));
    }
    let s = ChartSpace::new(dim, false)?;
    FieldFamily::from_generator(s.clone(), span, |i| unit_field(&s, &format!("E{i}"), i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffineLinear {
    /// X_α(x) = x + a_α
    Identity,
    /// X_α(x) = a_α; the members commute
    Zero,
}

/// X_α(x) = L x + decay^α e_α, α < count, on the first `dim` coordinates of l1(N).
pub fn affine_l1(dim: usize, count: usize, decay: f64, linear: AffineLinear) -> Result<FieldFamily> {
    if count > dim {
        return Err(Error::InvalidArgument(format!(
            "affine-l1 count {count} exceeds chart dimension {dim}"
        )));
    }
    if !(decay.abs() <= 1.0) {
        return Err(Error::InvalidArgument("affine-l1 needs |decay| <= 1 (uniformly bounded a_a)".into()));
    }
    let s = ChartSpace::new(dim, true)?;
    FieldFamily::from_generator(s.clone(), count, |a| {
        let weight = decay.powi(a as i32);
        let label = format!("A{a}");
        match linear {
            AffineLinear::Zero => {
                let mut v = Point::zeros(dim);
                v[a] = weight;
                constant_field(&s, &label, v)
            }
            AffineLinear::Identity => VectorField::new(label, Ball::whole(&s), move |x: &Point| {
                let mut v = x.clone();
                v[a] += weight;
                v
            })
            .with_jacobian(move |_: &Point| DMatrix::identity(dim, dim)),
        }
    })
}

/// X_α(x) = Φ(x)·a_α where `operator[i][j]` is the polynomial entry Φ_ij.
pub fn operator_family(space: &ChartSpace, operator: &[Vec<Polynomial>], vectors: &[Vec<f64>]) -> Result<FieldFamily> {
    let dim = space.dimension();
    if operator.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: operator.len(),
        });
    }
    let fdim = operator.first().map(|r| r.len()).unwrap_or(0);
    if operator.iter().any(|r| r.len() != fdim) {
        return Err(Error::InvalidArgument("operator rows must have equal length".into()));
    }
    let members = vectors
        .iter()
        .enumerate()
        .map(|(a, v)| {
            if v.len() != fdim {
                return Err(Error::DimensionMismatch {
                    expected: fdim,
                    got: v.len(),
                });
            }
            let comps = operator
                .iter()
                .map(|row| Polynomial {
                    terms: row.iter().zip(v).flat_map(|(p, &c)| p.scaled(c).terms).collect(),
                })
                .collect();
            polynomial_field(space, &format!("P{a}"), comps)
        })
        .collect::<Result<Vec<_>>>()?;
    FieldFamily::new(space.clone(), members)
}

/// Single fields with analytic Jacobians used across the test-suite.
pub fn analytic_catalog() -> Vec<VectorField> {
    let r1 = ChartSpace::euclidean(1);
    let r2 = ChartSpace::euclidean(2);
    let grow = polynomial_field(&r1, "x d/dx", vec![Polynomial::linear(1.0, 0, 1)]).expect("1d");
    let decay = polynomial_field(&r1, "-x d/dx", vec![Polynomial::linear(-1.0, 0, 1)]).expect("1d");
    let rotation = polynomial_field(
        &r2,
        "rotation",
        vec![Polynomial::linear(-1.0, 1, 2), Polynomial::linear(1.0, 0, 2)],
    )
    .expect("2d");
    let shear = polynomial_field(
        &r2,
        "shear",
        vec![
            Polynomial {
                terms: vec![
                    Monomial {
                        coeff: 1.0,
                        powers: vec![0, 0],
                    },
                    Monomial {
                        coeff: 0.25,
                        powers: vec![0, 2],
                    },
                ],
            },
            Polynomial::linear(-0.5, 0, 2),
        ],
    )
    .expect("2d");
    let mut out = vec![unit_field(&r2, "d/dx", 0), grow, decay, rotation, shear];
    out.extend(heisenberg().members().iter().cloned());
    out.extend(grushin().members().iter().cloned());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // p = 3 x y² + 2
        let p = Polynomial {
            terms: vec![
                Monomial {
                    coeff: 3.0,
                    powers: vec![1, 2],
                },
                Monomial {
                    coeff: 2.0,
                    powers: vec![0, 0],
                },
            ],
        };
        assert_eq!(p.eval(&[2.0, 3.0]), 56.0);
        assert_eq!(p.partial(&[2.0, 3.0], 0), 27.0);
        assert_eq!(p.partial(&[2.0, 3.0], 1), 36.0);
    }

    #[test]
    fn builtin_shapes() {
        let h = heisenberg();
        assert_eq!((h.dimension(), h.len()), (3, 2));
        let v = h.members()[1].eval(&Point::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(v.as_slice(), &[0.0, 1.0, 2.0]);
        let g = grushin();
        assert_eq!((g.dimension(), g.len()), (2, 2));
        assert!(commuting_constants(2, 3).is_err());
        let a = affine_l1(8, 8, 0.5, AffineLinear::Identity).unwrap();
        assert_eq!(a.len(), 8);
        assert!(a.space().truncation_of_l1());
        let v = a.members()[3].eval(&Point::zeros(8));
        assert_eq!(v[3], 0.125);
    }

    #[test]
    fn operator_family_matches_matrix_product() {
        // Φ(x) = [[1, x1], [0, 1]]
        let s = ChartSpace::euclidean(2);
        let op = vec![
            vec![Polynomial::constant(1.0, 2), Polynomial::linear(1.0, 0, 2)],
            vec![Polynomial::default(), Polynomial::constant(1.0, 2)],
        ];
        let fam = operator_family(&s, &op, &[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let x = Point::from_vec(vec![3.0, -1.0]);
        assert_eq!(fam.members()[1].eval(&x).as_slice(), &[6.0, 2.0]);
        let j = fam.members()[1].jacobian(&x);
        assert_eq!(j[(0, 0)], 2.0);
    }
}

//! Manufactured solutions for the convergence benchmarks.
//!
//! The smooth family `u = prod_i sin^2(pi x_i)` vanishes together with its
//! gradient on the boundary of the unit box, so it is an exact solution of
//! the clamped fourth-order problem with right-hand side
//! `eps^2 lap^2 u - lap u`. The layer family keeps a fixed Poisson load
//! `f = -lap u0` with `u0 = prod_i sin(pi x_i)` and measures errors against
//! `u0`, whose boundary layers cap the attainable rates for small `eps`.

use crate::element::ScalarField;
use crate::num::{lit, Real};
use nalgebra::{SMatrix, SVector};

/// `u(x) = prod_i sin^2(pi x_i)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinSquaredProduct;

impl SinSquaredProduct {
    fn pieces<R: Real, const D: usize>(x: &SVector<R, D>) -> ([R; 3], [R; 3], [R; 3]) {
        // g, g', g'' per coordinate (padded to 3).
        let pi = R::pi();
        let two_pi = pi + pi;
        let mut g = [R::one(); 3];
        let mut dg = [R::zero(); 3];
        let mut ddg = [R::zero(); 3];
        for i in 0..D {
            let s = (pi * x[i]).sin();
            g[i] = s * s;
            dg[i] = pi * (two_pi * x[i]).sin();
            ddg[i] = lit::<R>(2.0) * pi * pi * (two_pi * x[i]).cos();
        }
        (g, dg, ddg)
    }

    fn product_except<R: Real, const D: usize>(g: &[R; 3], skip: &[usize]) -> R {
        let mut p = R::one();
        for i in 0..D {
            if !skip.contains(&i) {
                p *= g[i];
            }
        }
        p
    }

    pub fn laplacian<R: Real, const D: usize>(&self, x: &SVector<R, D>) -> R {
        let (g, _, ddg) = Self::pieces::<R, D>(x);
        let mut acc = R::zero();
        for i in 0..D {
            acc += ddg[i] * Self::product_except::<R, D>(&g, &[i]);
        }
        acc
    }

    /// `lap^2 u`, using `g'''' = -4 pi^2 g''` per factor.
    pub fn bilaplacian<R: Real, const D: usize>(&self, x: &SVector<R, D>) -> R {
        let (g, _, ddg) = Self::pieces::<R, D>(x);
        let pi = R::pi();
        let minus_four_pi2 = -lit::<R>(4.0) * pi * pi;
        let mut acc = R::zero();
        for i in 0..D {
            acc += minus_four_pi2 * ddg[i] * Self::product_except::<R, D>(&g, &[i]);
            for j in 0..D {
                if j != i {
                    acc += ddg[i] * ddg[j] * Self::product_except::<R, D>(&g, &[i, j]);
                }
            }
        }
        acc
    }
}

impl<R: Real, const D: usize> ScalarField<R, D> for SinSquaredProduct {
    fn value(&self, x: &SVector<R, D>) -> R {
        let (g, _, _) = Self::pieces::<R, D>(x);
        Self::product_except::<R, D>(&g, &[])
    }

    fn gradient(&self, x: &SVector<R, D>) -> SVector<R, D> {
        let (g, dg, _) = Self::pieces::<R, D>(x);
        SVector::from_fn(|i, _| dg[i] * Self::product_except::<R, D>(&g, &[i]))
    }

    fn hessian(&self, x: &SVector<R, D>) -> SMatrix<R, D, D> {
        let (g, dg, ddg) = Self::pieces::<R, D>(x);
        SMatrix::from_fn(|i, j| {
            if i == j {
                ddg[i] * Self::product_except::<R, D>(&g, &[i])
            } else {
                dg[i] * dg[j] * Self::product_except::<R, D>(&g, &[i, j])
            }
        })
    }
}

/// `u0(x) = prod_i sin(pi x_i)`, the Poisson solution of the layer problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct SineProduct;

impl SineProduct {
    pub fn laplacian<R: Real, const D: usize>(&self, x: &SVector<R, D>) -> R {
        let d = lit::<R>(D as f64);
        let pi = R::pi();
        -d * pi * pi * ScalarField::<R, D>::value(self, x)
    }
}

impl<R: Real, const D: usize> ScalarField<R, D> for SineProduct {
    fn value(&self, x: &SVector<R, D>) -> R {
        let pi = R::pi();
        let mut p = R::one();
        for i in 0..D {
            p *= (pi * x[i]).sin();
        }
        p
    }

    fn gradient(&self, x: &SVector<R, D>) -> SVector<R, D> {
        let pi = R::pi();
        SVector::from_fn(|i, _| {
            let mut p = pi * (pi * x[i]).cos();
            for j in 0..D {
                if j != i {
                    p *= (pi * x[j]).sin();
                }
            }
            p
        })
    }

    fn hessian(&self, x: &SVector<R, D>) -> SMatrix<R, D, D> {
        let pi = R::pi();
        SMatrix::from_fn(|i, j| {
            let mut p = R::one();
            if i == j {
                p *= -pi * pi * (pi * x[i]).sin();
                for k in 0..D {
                    if k != i {
                        p *= (pi * x[k]).sin();
                    }
                }
            } else {
                p *= pi * pi * (pi * x[i]).cos() * (pi * x[j]).cos();
                for k in 0..D {
                    if k != i && k != j {
                        p *= (pi * x[k]).sin();
                    }
                }
            }
            p
        })
    }
}

/// Closed-form right-hand side `eps^2 lap^2 u - lap u` of the smooth family.
pub fn smooth_rhs<R: Real, const D: usize>(epsilon: R) -> impl Fn(&SVector<R, D>) -> R {
    let u = SinSquaredProduct;
    let eps2 = epsilon * epsilon;
    move |x| eps2 * u.bilaplacian(x) - u.laplacian(x)
}

/// Fixed Poisson load `f = -lap u0 = D pi^2 prod_i sin(pi x_i)` of the layer
/// problem (independent of `eps`).
pub fn layer_rhs<R: Real, const D: usize>() -> impl Fn(&SVector<R, D>) -> R {
    let u0 = SineProduct;
    move |x| -u0.laplacian(x)
}

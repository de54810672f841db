//! Smooth scalar and matrix fields on the plane.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::geometry::{Mat2, Vec2};

/// A C² function of position with exact first and second derivatives.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
    fn hessian(&self, x: Vec2) -> Mat2;

    /// Whether the field is known not to depend on position.
    fn is_constant(&self) -> bool {
        false
    }
}

pub type Field = Arc<dyn ScalarField>;

fn at(x: Vec2) -> [f64; 4] {
    [x.x1, x.x2, 0.0, 0.0]
}

/// A field given by an expression in `x1`, `x2`.
#[derive(Clone, Debug)]
pub struct ExprField {
    source: String,
    f: Expr,
    df: [Expr; 2],
    d2f: [[Expr; 2]; 2],
}

impl ExprField {
    pub fn parse(src: &str) -> Result<Self> {
        let f = Expr::parse_with(src, &[Var::X1, Var::X2])?;
        let df = [f.derivative(Var::X1), f.derivative(Var::X2)];
        let d2f = [
            [df[0].derivative(Var::X1), df[0].derivative(Var::X2)],
            [df[1].derivative(Var::X1), df[1].derivative(Var::X2)],
        ];
        Ok(ExprField {
            source: src.to_string(),
            f,
            df,
            d2f,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression does not depend on position.
    pub fn is_constant(&self) -> bool {
        !self.f.uses(Var::X1) && !self.f.uses(Var::X2)
    }

    pub fn into_field(self) -> Field {
        Arc::new(self)
    }
}

impl ScalarField for ExprField {
    fn value(&self, x: Vec2) -> f64 {
        self.f.eval(&at(x))
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        let v = at(x);
        Vec2::new(self.df[0].eval(&v), self.df[1].eval(&v))
    }

    fn hessian(&self, x: Vec2) -> Mat2 {
        let v = at(x);
        Mat2::new(
            self.d2f[0][0].eval(&v),
            self.d2f[0][1].eval(&v),
            self.d2f[1][0].eval(&v),
            self.d2f[1][1].eval(&v),
        )
    }

    fn is_constant(&self) -> bool {
        ExprField::is_constant(self)
    }
}

/// `c + ⟨g, x⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub c: f64,
    pub g: Vec2,
}

impl Affine {
    pub fn new(c: f64, g: Vec2) -> Self {
        Affine { c, g }
    }

    pub fn into_field(self) -> Field {
        Arc::new(self)
    }
}

impl ScalarField for Affine {
    fn value(&self, x: Vec2) -> f64 {
        self.c + self.g.dot(x)
    }

    fn gradient(&self, _x: Vec2) -> Vec2 {
        self.g
    }

    fn hessian(&self, _x: Vec2) -> Mat2 {
        Mat2::ZERO
    }

    fn is_constant(&self) -> bool {
        self.g == Vec2::ZERO
    }
}

/// `c + ⟨g, x⟩ + ½⟨Q x, x⟩` with symmetric `Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic {
    pub c: f64,
    pub g: Vec2,
    pub q: Mat2,
}

impl Quadratic {
    pub fn new(c: f64, g: Vec2, q: Mat2) -> Result<Self> {
        if !q.is_symmetric(1e-14) {
            return Err(Error::InvalidInput("quadratic field needs a symmetric matrix".into()));
        }
        Ok(Quadratic { c, g, q })
    }

    pub fn into_field(self) -> Field {
        Arc::new(self)
    }
}

impl ScalarField for Quadratic {
    fn value(&self, x: Vec2) -> f64 {
        self.c + self.g.dot(x) + 0.5 * self.q.form(x, x)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        self.g + self.q.mul_vec(x)
    }

    fn hessian(&self, _x: Vec2) -> Mat2 {
        self.q
    }
}

/// A symmetric 2×2 matrix depending smoothly on position, stored by its
/// three independent entries.
#[derive(Clone, Debug)]
pub struct MatrixField {
    a11: Field,
    a12: Field,
    a22: Field,
    constant: Option<Mat2>,
}

impl MatrixField {
    pub fn constant(m: Mat2) -> Result<Self> {
        if !m.is_symmetric(1e-14) {
            return Err(Error::NotSpd(format!("{m:?} is not symmetric")));
        }
        let k = |c: f64| Affine::new(c, Vec2::ZERO).into_field();
        Ok(MatrixField {
            a11: k(m.m[0][0]),
            a12: k(m.m[0][1]),
            a22: k(m.m[1][1]),
            constant: Some(m),
        })
    }

    pub fn from_entries(a11: Field, a12: Field, a22: Field) -> Self {
        MatrixField {
            a11,
            a12,
            a22,
            constant: None,
        }
    }

    pub fn at(&self, x: Vec2) -> Mat2 {
        if let Some(m) = self.constant {
            return m;
        }
        let o = self.a12.value(x);
        Mat2::new(self.a11.value(x), o, o, self.a22.value(x))
    }

    /// Partial derivatives ∂A/∂x1 and ∂A/∂x2.
    pub fn derivatives(&self, x: Vec2) -> [Mat2; 2] {
        if self.constant.is_some() {
            return [Mat2::ZERO; 2];
        }
        let g11 = self.a11.gradient(x);
        let g12 = self.a12.gradient(x);
        let g22 = self.a22.gradient(x);
        [
            Mat2::new(g11.x1, g12.x1, g12.x1, g22.x1),
            Mat2::new(g11.x2, g12.x2, g12.x2, g22.x2),
        ]
    }

    pub fn as_constant(&self) -> Option<Mat2> {
        self.constant
    }
}

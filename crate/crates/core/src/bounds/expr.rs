//! A tiny expression tree used to evaluate the malicious penalty constants a
//! second, independent way.

use std::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sym {
    Eta,
    G,
    Mu,
    L,
    Rho,
    T0,
    E,
    D,
}

#[derive(Debug, Clone, Copy)]
pub struct Env {
    pub eta: f64,
    pub g: f64,
    pub mu: f64,
    pub l: f64,
    pub rho: f64,
    pub t0: f64,
    pub e: f64,
    pub d: f64,
}

impl Env {
    fn get(&self, s: Sym) -> f64 {
        match s {
            Sym::Eta => self.eta,
            Sym::G => self.g,
            Sym::Mu => self.mu,
            Sym::L => self.l,
            Sym::Rho => self.rho,
            Sym::T0 => self.t0,
            Sym::E => self.e,
            Sym::D => self.d,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(Sym),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Powi(Box<Expr>, i32),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(s) => env.get(*s),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Powi(a, k) => a.eval(env).powi(*k),
            Expr::Exp(a) => a.eval(env).exp(),
            Expr::Sqrt(a) => a.eval(env).sqrt(),
        }
    }

    pub fn powi(self, k: i32) -> Expr {
        Expr::Powi(Box::new(self), k)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(Box::new(self))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $variant:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Num(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Num(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

fn v(s: Sym) -> Expr {
    Expr::Var(s)
}

/// C̃₁(T0, E, D) as a tree.
pub fn c_tilde_1() -> Expr {
    let one_minus_rho = || 1.0 - v(Sym::Rho);
    let decay = || (Expr::Num(-1.0) * v(Sym::T0) * v(Sym::E).powi(2)).exp();
    let mu_plus_l = || v(Sym::Mu) + v(Sym::L);
    let prefactor = 16.0 * v(Sym::Eta) * decay() * v(Sym::D).sqrt() / one_minus_rho();
    let first = v(Sym::G) / (1.0 - (Expr::Num(-1.0) * v(Sym::E).powi(2)).exp()).powi(2);
    let second =
        (v(Sym::G) + (v(Sym::Eta) + 4.0 / v(Sym::Mu)) * mu_plus_l()) / one_minus_rho().powi(2);
    let third = mu_plus_l() * (v(Sym::G) + 2.0 * v(Sym::Mu) * v(Sym::D).sqrt() * decay())
        / (v(Sym::Mu) * one_minus_rho().powi(3));
    prefactor * (first + second + third)
}

/// C̃₂(T0, E, D) as a tree.
pub fn c_tilde_2() -> Expr {
    let eta = || v(Sym::Eta);
    let q = || (Expr::Num(-2.0) * v(Sym::E).powi(2)).exp();
    let one_minus_q = || 1.0 - q();
    let prefactor = 4.0
        * eta()
        * (v(Sym::L) + 1.0)
        * v(Sym::D)
        * (Expr::Num(-2.0) * v(Sym::T0) * v(Sym::E).powi(2)).exp()
        / one_minus_q();
    let bracket = 4.0 * eta() * q() / one_minus_q().powi(2)
        + (6.0 * eta() + v(Sym::G) / v(Sym::Mu)) * q() / one_minus_q()
        + 4.0 * eta()
        + 4.0 * eta() * v(Sym::L) / v(Sym::Mu).powi(2)
        + v(Sym::G) / v(Sym::Mu);
    prefactor * bracket
}

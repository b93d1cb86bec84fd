//! Symbols given as formulas in `p`, `q` and `t`, with exact derivatives.

use std::sync::Arc;

use exmex::prelude::*;
use exmex::{Differentiate, FlatEx};
use toeplitz_core::geometry::SymbolField;
use toeplitz_core::quantum::toeplitz_subprincipal;

use crate::config::{ConfigError, SymbolChoice};

/// Largest periodicity defect accepted for a user symbol.
pub const PERIODICITY_TOL: f64 = 1e-9;

const SLOTS: [&str; 3] = ["t", "p", "q"];

/// A parsed formula; `slots[i]` is the position in `(t, p, q)` of the
/// expression's `i`-th variable.
#[derive(Clone)]
struct Formula {
    expr: FlatEx<f64>,
    slots: Vec<usize>,
}

impl Formula {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let expr = FlatEx::<f64>::parse(text)
            .map_err(|e| ConfigError(format!("cannot parse symbol {text:?}: {e}")))?;
        let slots = expr
            .var_names()
            .iter()
            .map(|v| {
                SLOTS.iter().position(|s| s == v).ok_or_else(|| {
                    ConfigError(format!(
                        "symbol {text:?} uses variable {v:?}; only p, q and t are allowed"
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { expr, slots })
    }

    fn uses(&self, slot: usize) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }

    /// `∂/∂(slot)`, or `None` when the formula does not depend on it.
    fn partial(&self, slot: usize) -> Result<Option<Self>, ConfigError> {
        let Some(i) = self.uses(slot) else {
            return Ok(None);
        };
        let expr = self
            .expr
            .clone()
            .partial(i)
            .map_err(|e| ConfigError(format!("cannot differentiate symbol: {e}")))?;
        Ok(Some(Self {
            expr,
            slots: self.slots.clone(),
        }))
    }

    fn eval(&self, t: f64, p: f64, q: f64) -> f64 {
        let args = [t, p, q];
        let mut vals = [0.0; 3];
        for (v, &s) in vals.iter_mut().zip(&self.slots) {
            *v = args[s];
        }
        self.expr.eval(&vals[..self.slots.len()]).unwrap_or(f64::NAN)
    }
}

fn evaluator(f: Option<Formula>) -> impl Fn(f64, f64, f64) -> f64 + Send + Sync + Clone + 'static {
    let f = f.map(Arc::new);
    move |t, p, q| f.as_ref().map_or(0.0, |f| f.eval(t, p, q))
}

/// The symbol for `choice`, carrying the Toeplitz subprincipal symbol
/// `(H_pp + H_qq)/(16π)` for formulas.
pub fn build_symbol(choice: &SymbolChoice) -> Result<SymbolField, ConfigError> {
    let text = match choice {
        SymbolChoice::ModelCos => return Ok(SymbolField::model_cos()),
        SymbolChoice::Expression(text) => text,
    };
    let f = Formula::parse(text)?;
    let autonomous = f.uses(0).is_none();
    let fp = f.partial(1)?;
    let fq = f.partial(2)?;
    let fpp = fp.as_ref().map(|g| g.partial(1)).transpose()?.flatten();
    let fpq = fp.as_ref().map(|g| g.partial(2)).transpose()?.flatten();
    let fqq = fq.as_ref().map(|g| g.partial(2)).transpose()?.flatten();
    let (gp, gq) = (evaluator(fp), evaluator(fq));
    let (hpp, hpq, hqq) = (evaluator(fpp), evaluator(fpq), evaluator(fqq));
    let value = evaluator(Some(f));
    let base = SymbolField::from_fn(text.clone(), autonomous, value)
        .with_gradient(move |t, p, q| [gp(t, p, q), gq(t, p, q)])
        .with_hessian(move |t, p, q| {
            let off = hpq(t, p, q);
            [[hpp(t, p, q), off], [off, hqq(t, p, q)]]
        });
    for x in [[0.1, 0.2], [0.7, 0.9]] {
        let h = base.h(0.0, x);
        if !h.is_finite() {
            return Err(ConfigError(format!("symbol {text:?} is not finite at {x:?}")));
        }
    }
    let defect = base.periodicity_defect(0.0, 16);
    if !(defect <= PERIODICITY_TOL) {
        return Err(ConfigError(format!(
            "symbol {text:?} is not 1-periodic in p and q (defect {defect:.3e}); use sin/cos of 2*PI*p, 2*PI*q"
        )));
    }
    let inner = base.clone();
    Ok(base.with_subprincipal(move |t, p, q| toeplitz_subprincipal(&inner, t, [p, q])))
}

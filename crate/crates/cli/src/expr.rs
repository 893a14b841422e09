//! Closed-form scalar expressions for boundary data and test fields.
//!
//! Syntax is that of `evalexpr`: `^` is the power operator and functions
//! live under `math::`, e.g. `0.5*y + 0.1*math::sin(pi*z)`. The constants
//! `pi` and `e` are predefined.

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value,
};

#[derive(Debug, Clone)]
pub struct Expr {
    text: String,
    vars: Vec<String>,
    tree: Node<DefaultNumericTypes>,
}

impl Expr {
    /// Compiles `text`, rejecting identifiers outside `vars`.
    pub fn compile(text: &str, vars: &[&str]) -> Result<Self, String> {
        let tree = build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|e| format!("cannot parse expression '{text}': {e}"))?;
        for id in tree.iter_variable_identifiers() {
            if !vars.contains(&id) && id != "pi" && id != "e" {
                return Err(format!(
                    "expression '{text}' uses unknown variable '{id}' (allowed: {})",
                    vars.join(", ")
                ));
            }
        }
        let e = Expr {
            text: text.to_string(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            tree,
        };
        // Incomplete operators only surface on evaluation.
        e.tree
            .eval_number_with_context(&e.context(&vec![1.0; vars.len()])?)
            .map_err(|err| format!("cannot parse expression '{text}': {err}"))?;
        Ok(e)
    }

    fn context(&self, values: &[f64]) -> Result<HashMapContext<DefaultNumericTypes>, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let mut bind = |k: &str, v: f64| {
            ctx.set_value(k.to_string(), Value::Float(v))
                .map_err(|e| format!("cannot bind {k}: {e}"))
        };
        bind("pi", std::f64::consts::PI)?;
        bind("e", std::f64::consts::E)?;
        for (k, v) in self.vars.iter().zip(values) {
            bind(k, *v)?;
        }
        Ok(ctx)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Evaluates with `values` bound to the declared variables in order.
    pub fn eval(&self, values: &[f64]) -> Result<f64, String> {
        let out = self
            .tree
            .eval_number_with_context(&self.context(values)?)
            .map_err(|e| format!("cannot evaluate '{}': {e}", self.text))?;
        if out.is_finite() {
            Ok(out)
        } else {
            Err(format!("'{}' is not finite at {values:?}", self.text))
        }
    }

    /// Evaluator that panics on failure; call [`Expr::check_on`] first.
    pub fn as_fn2(&self) -> impl Fn(f64, f64) -> f64 + '_ {
        move |a, b| self.eval(&[a, b]).expect("expression validated before use")
    }

    /// Evaluates at every point, returning the first failure.
    pub fn check_on(&self, points: impl IntoIterator<Item = (f64, f64)>) -> Result<(), String> {
        for (a, b) in points {
            self.eval(&[a, b])?;
        }
        Ok(())
    }
}

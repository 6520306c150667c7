//! Scalar target expressions: constants, `+ - * / ^`, `sin cos exp ...`,
//! coordinates `x y z r theta` (`θ` and `×` are accepted).

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

use crate::error::{CliError, CliResult};

const FUNCTIONS: [&str; 10] = ["sin", "cos", "tan", "exp", "ln", "sqrt", "abs", "sinh", "cosh", "tanh"];
const VARIABLES: [&str; 6] = ["x", "y", "z", "r", "theta", "pi"];

#[derive(Clone, Debug)]
pub struct Expr {
    source: String,
    tree: Node<DefaultNumericTypes>,
}

/// Rewrite to evalexpr syntax: unicode symbols, `math::` prefixes and float
/// literals (evalexpr divides integers exactly otherwise).
fn normalize(src: &str) -> CliResult<String> {
    let s = src.replace('θ', "theta").replace('×', "*").replace('−', "-").replace('π', "pi");
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let call = chars[i..].iter().find(|c| !c.is_whitespace()) == Some(&'(');
            if call && FUNCTIONS.contains(&word.as_str()) {
                out.push_str("math::");
            } else if call || !VARIABLES.contains(&word.as_str()) {
                return Err(CliError::Usage(format!("unknown name `{word}` in expression `{src}`")));
            }
            out.push_str(&word);
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mut lit: String = chars[start..i].iter().collect();
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                let k = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > k {
                    let exp: String = chars[i + 1..j].iter().collect();
                    let mant: f64 = lit.parse().map_err(|_| CliError::Usage(format!("bad number `{lit}` in `{src}`")))?;
                    let e: i32 = exp.parse().map_err(|_| CliError::Usage(format!("bad exponent in `{src}`")))?;
                    lit = format!("{:?}", mant * 10f64.powi(e));
                    i = j;
                }
            }
            if !lit.contains('.') && !lit.contains('e') {
                lit.push_str(".0");
            }
            if lit.starts_with('.') {
                lit.insert(0, '0');
            }
            out.push_str(&lit);
        } else {
            out.push(c);
            i += 1;
        }
    }
    Ok(out)
}

impl Expr {
    pub fn parse(src: &str) -> CliResult<Self> {
        let norm = normalize(src)?;
        let tree = build_operator_tree::<DefaultNumericTypes>(&norm)
            .map_err(|e| CliError::Usage(format!("cannot parse expression `{src}`: {e}")))?;
        let e = Self { source: src.to_string(), tree };
        // missing operands only surface on evaluation
        e.raw([0.31, 0.42, 0.53]).map_err(|err| CliError::Usage(format!("cannot parse expression `{src}`: {err}")))?;
        Ok(e)
    }

    fn raw(&self, p: [f64; 3]) -> Result<f64, evalexpr::EvalexprError<DefaultNumericTypes>> {
        let [x, y, z] = p;
        self.with_vars(&[("x", x), ("y", y), ("z", z), ("r", x.hypot(y)), ("theta", y.atan2(x))])
    }

    fn with_vars(&self, vars: &[(&str, f64)]) -> Result<f64, evalexpr::EvalexprError<DefaultNumericTypes>> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))?;
        for &(k, v) in vars {
            ctx.set_value(k.into(), Value::Float(v))?;
        }
        self.tree.eval_number_with_context(&ctx)
    }

    fn finite(&self, v: Result<f64, evalexpr::EvalexprError<DefaultNumericTypes>>, at: String) -> CliResult<f64> {
        let v = v.map_err(|e| CliError::Usage(format!("cannot evaluate `{}`: {e}", self.source)))?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("`{}` is not finite at {at}", self.source)));
        }
        Ok(v)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at a point; `r` and `theta` are polar coordinates of `(x, y)`.
    pub fn eval(&self, p: [f64; 3]) -> CliResult<f64> {
        self.finite(self.raw(p), format!("{p:?}"))
    }

    /// Value on a line parameter: `x = theta = t`.
    pub fn eval_line(&self, t: f64) -> CliResult<f64> {
        self.finite(self.with_vars(&[("x", t), ("theta", t), ("y", 0.0), ("z", 0.0), ("r", 1.0)]), format!("{t}"))
    }
}

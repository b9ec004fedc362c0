//! Arithmetic expressions over named real variables, used for custom plant
//! dynamics and disturbances. Parsing is done by `evalexpr`; integer literals
//! are promoted to floats so `1/2` means one half, and the usual math
//! functions are available under their plain names.

use evalexpr::error::EvalexprResultValue;
use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node,
    Operator, Value,
};

type UnaryFn = fn(f64) -> f64;

const FUNCTIONS: &[(&str, UnaryFn)] = &[
    ("exp", f64::exp),
    ("ln", f64::ln),
    ("sqrt", f64::sqrt),
    ("abs", f64::abs),
    ("sin", f64::sin),
    ("cos", f64::cos),
    ("tan", f64::tan),
    ("tanh", f64::tanh),
    ("sinh", f64::sinh),
    ("cosh", f64::cosh),
    ("atan", f64::atan),
];

#[derive(Debug, Clone)]
pub struct Expr {
    node: Node<DefaultNumericTypes>,
    names: Vec<String>,
}

struct Vars<'a> {
    names: &'a [String],
    values: Vec<Value>,
}

impl Context for Vars<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value> {
        self.names
            .iter()
            .position(|n| n == identifier)
            .map(|i| &self.values[i])
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResultValue {
        let f = FUNCTIONS
            .iter()
            .find(|(name, _)| *name == identifier)
            .map(|(_, f)| f)
            .ok_or_else(|| EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))?;
        Ok(Value::Float(f(argument.as_number()?)))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        true
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<()> {
        Ok(())
    }
}

fn promote_integers(node: &mut Node) {
    if let Operator::Const { value } = node.operator_mut() {
        if let Value::Int(i) = value {
            *value = Value::Float(*i as f64);
        }
    }
    for child in node.children_mut() {
        promote_integers(child);
    }
}

impl Expr {
    /// Parses `text`, allowing only the listed variable names and the
    /// supported functions.
    pub fn parse(text: &str, variables: &[String]) -> Result<Self, String> {
        let mut node = build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|e| format!("cannot parse `{text}`: {e}"))?;
        if let Some(v) = node
            .iter_variable_identifiers()
            .find(|v| !variables.iter().any(|a| a == v))
        {
            return Err(format!(
                "unknown variable `{v}` in `{text}` (allowed: {})",
                variables.join(", ")
            ));
        }
        if let Some(f) = node
            .iter_function_identifiers()
            .find(|f| !FUNCTIONS.iter().any(|(name, _)| name == f))
        {
            let known: Vec<&str> = FUNCTIONS.iter().map(|(n, _)| *n).collect();
            return Err(format!(
                "unknown function `{f}` in `{text}` (allowed: {})",
                known.join(", ")
            ));
        }
        promote_integers(&mut node);
        let expr = Self {
            node,
            names: variables.to_vec(),
        };
        expr.try_eval(&vec![0.5; variables.len()])
            .map_err(|e| format!("`{text}` does not evaluate to a number: {e}"))?;
        Ok(expr)
    }

    fn try_eval(&self, values: &[f64]) -> Result<f64, EvalexprError> {
        let ctx = Vars {
            names: &self.names,
            values: values.iter().map(|v| Value::Float(*v)).collect(),
        };
        self.node.eval_number_with_context(&ctx)
    }

    /// Value at `values`, given in the order of the declared variables; NaN
    /// if evaluation fails.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.try_eval(values).unwrap_or(f64::NAN)
    }
}

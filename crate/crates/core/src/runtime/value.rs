use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::lang::TypeTag;

/// A subject-language value detached from any heap. Test files encode
/// `Int` as a number, `Bool` as a boolean, `IntArray` as an array and `Str`
/// as a string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i32),
    Bool(bool),
    IntArray(Vec<i32>),
    Str(String),
}

impl Value {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Value::Int(_) => TypeTag::Int,
            Value::Bool(_) => TypeTag::Boolean,
            Value::IntArray(_) => TypeTag::IntArray,
            Value::Str(_) => TypeTag::Str,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::IntArray(a) => {
                let parts: Vec<String> = a.iter().map(i32::to_string).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Interpreter-side value. Arrays are shared references as in Java.
#[derive(Debug, Clone)]
pub(crate) enum RtValue {
    Int(i32),
    Bool(bool),
    Arr(Rc<RefCell<Vec<i32>>>),
    Str(Rc<str>),
}

impl RtValue {
    pub fn from_value(v: &Value) -> Self {
        match v {
            Value::Int(i) => RtValue::Int(*i),
            Value::Bool(b) => RtValue::Bool(*b),
            Value::IntArray(a) => RtValue::Arr(Rc::new(RefCell::new(a.clone()))),
            Value::Str(s) => RtValue::Str(Rc::from(s.as_str())),
        }
    }

    /// Deep copy into a detached value.
    pub fn to_value(&self) -> Value {
        match self {
            RtValue::Int(i) => Value::Int(*i),
            RtValue::Bool(b) => Value::Bool(*b),
            RtValue::Arr(a) => Value::IntArray(a.borrow().clone()),
            RtValue::Str(s) => Value::Str(s.to_string()),
        }
    }

    pub fn as_int(&self) -> i32 {
        match self {
            RtValue::Int(i) => *i,
            other => panic!("type checker admitted non-int {other:?}"),
        }
    }

    pub fn as_bool(&self) -> bool {
        match self {
            RtValue::Bool(b) => *b,
            other => panic!("type checker admitted non-boolean {other:?}"),
        }
    }
}

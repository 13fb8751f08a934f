use serde::Serialize;
use std::fmt;

/// One finding of a validation pass, with a location such as
/// `nodes[1].transition` or `unified.members[2]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Outcome of a structural validation.
///
/// `violations` make the input invalid. `inconclusive` lists checks that could
/// neither be confirmed nor refuted with the available bounds. `warnings` never
/// affect validity.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Issue>,
    pub inconclusive: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn inconclusive(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.inconclusive.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn warning(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
        self.inconclusive.extend(other.inconclusive);
        self.warnings.extend(other.warnings);
    }

    /// Re-roots every location under `prefix`.
    pub fn prefixed(mut self, prefix: &str) -> Self {
        for issue in self
            .violations
            .iter_mut()
            .chain(self.inconclusive.iter_mut())
            .chain(self.warnings.iter_mut())
        {
            issue.location = if issue.location.is_empty() {
                prefix.to_string()
            } else {
                format!("{prefix}.{}", issue.location)
            };
        }
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        for v in &self.inconclusive {
            writeln!(f, "inconclusive: {v}")?;
        }
        for v in &self.warnings {
            writeln!(f, "warning: {v}")?;
        }
        Ok(())
    }
}

/// Serializers for reals that may be infinite: JSON has no infinity, so
/// `±∞` is written as the strings `"inf"` and `"-inf"` and NaN as `null`.
pub mod real {
    use serde::Serializer;

    pub fn f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_none()
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => f64(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn pair<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeTuple;
        struct R(f64);
        impl serde::Serialize for R {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                f64(&self.0, s)
            }
        }
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&R(v.0))?;
        t.serialize_element(&R(v.1))?;
        t.end()
    }
}

//! Permission scopes: sets of atomic `resource:action` strings.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("malformed permission {0:?}")]
    Malformed(String),
}

/// A set of permissions. Serialized as a sorted JSON array of strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Scope {
    permissions: BTreeSet<String>,
}

fn valid_token(t: &str) -> bool {
    !t.is_empty()
        && t.bytes()
            .all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-' | b'.'))
}

/// Checks the `resource:action` shape with lowercase ASCII tokens.
pub fn is_valid_permission(p: &str) -> bool {
    match p.split_once(':') {
        Some((resource, action)) => valid_token(resource) && valid_token(action),
        None => false,
    }
}

impl Scope {
    pub fn new<I, S>(permissions: I) -> Result<Self, ScopeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for p in permissions {
            let p = p.as_ref();
            if !is_valid_permission(p) {
                return Err(ScopeError::Malformed(p.to_string()));
            }
            set.insert(p.to_string());
        }
        Ok(Self { permissions: set })
    }

    pub fn permissions(&self) -> &BTreeSet<String> {
        &self.permissions
    }

    pub fn contains_permission(&self, p: &str) -> bool {
        self.permissions.contains(p)
    }

    pub fn is_empty(&self) -> bool {
        self.permissions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.permissions.len()
    }
}

impl TryFrom<Vec<String>> for Scope {
    type Error = ScopeError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Scope::new(v)
    }
}

impl From<Scope> for Vec<String> {
    fn from(s: Scope) -> Self {
        s.permissions.into_iter().collect()
    }
}

/// True iff every permission of `child` is also in `parent`.
pub fn scope_contains(parent: &Scope, child: &Scope) -> bool {
    child.permissions.is_subset(&parent.permissions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ps: &[&str]) -> Scope {
        Scope::new(ps.iter().copied()).unwrap()
    }

    #[test]
    fn containment_examples() {
        assert!(scope_contains(&s(&["a:read", "a:write"]), &s(&["a:read"])));
        assert!(scope_contains(&s(&["a:read"]), &s(&["a:read"])));
        assert!(!scope_contains(&s(&["a:read"]), &s(&["a:read", "a:write"])));
        assert!(scope_contains(&s(&["a:read"]), &s(&[])));
    }

    #[test]
    fn malformed_permissions() {
        for bad in ["read", "A:read", "a:", ":b", "a:b:c", "a b:c", ""] {
            assert!(Scope::new([bad]).is_err(), "{bad:?} accepted");
        }
        assert!(Scope::new(["doc-store.v2:read_all"]).is_ok());
    }

    #[test]
    fn serializes_sorted_and_validates_on_read() {
        let scope = s(&["z:w", "a:r"]);
        assert_eq!(serde_json::to_string(&scope).unwrap(), r#"["a:r","z:w"]"#);
        assert!(serde_json::from_str::<Scope>(r#"["Bad"]"#).is_err());
        let back: Scope = serde_json::from_str(r#"["z:w","a:r","a:r"]"#).unwrap();
        assert_eq!(back, scope);
    }
}

//! Name-keyed registry of boxed strategy objects.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub trait Named {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str {
        ""
    }
}

pub struct Registry<T: ?Sized> {
    items: BTreeMap<&'static str, Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new() -> Self {
        Registry { items: BTreeMap::new() }
    }

    /// Adds `item`, replacing an earlier entry of the same name.
    pub fn register(&mut self, item: Box<T>) {
        self.items.insert(item.name(), item);
    }

    pub fn get(&self, name: &str) -> Option<&T> {
        self.items.get(name).map(|b| b.as_ref())
    }

    /// Like `get`, with an error listing the known names.
    pub fn require(&self, name: &str) -> Result<&T> {
        self.get(name).ok_or_else(|| Error::Config(format!("unknown name '{name}'; known: {}", self.list().join(", "))))
    }

    /// Registered names in sorted order.
    pub fn list(&self) -> Vec<&'static str> {
        self.items.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.values().map(|b| b.as_ref())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl<T: ?Sized + Named> Default for Registry<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Shape: Named {
        fn sides(&self) -> usize;
    }

    struct Tri;
    impl Named for Tri {
        fn name(&self) -> &'static str {
            "tri"
        }
    }
    impl Shape for Tri {
        fn sides(&self) -> usize {
            3
        }
    }

    struct Quad(usize);
    impl Named for Quad {
        fn name(&self) -> &'static str {
            "quad"
        }
    }
    impl Shape for Quad {
        fn sides(&self) -> usize {
            self.0
        }
    }

    #[test]
    fn lookup_and_replace() {
        let mut r: Registry<dyn Shape> = Registry::new();
        r.register(Box::new(Quad(5)));
        r.register(Box::new(Tri));
        r.register(Box::new(Quad(4)));
        assert_eq!(r.list(), vec!["quad", "tri"]);
        assert_eq!(r.get("quad").unwrap().sides(), 4);
        assert_eq!(r.iter().map(|s| s.sides()).sum::<usize>(), 7);
        let e = r.require("hex").err().unwrap();
        assert!(e.to_string().contains("quad, tri"));
    }
}

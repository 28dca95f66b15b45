//! Name-keyed strategy registry.
//!
//! Each strategy family (coarse steppers, optimizers) exposes a registry
//! mapping a stable name to a factory. Factories receive a family-specific
//! context and produce a boxed trait object, so the strategy in use is picked
//! at runtime from configuration.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

type Factory<T, C> = Box<dyn Fn(&C) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<T: ?Sized, C> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T, C>>,
}

impl<T: ?Sized, C> Registry<T, C> {
    /// An empty registry for strategies of the given kind ("optimizer", ...).
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    /// Registers `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: impl Into<String>, factory: F) -> &mut Self
    where
        F: Fn(&C) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, context: &C) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(context),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_owned(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

impl<T: ?Sized, C> std::fmt::Debug for Registry<T, C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Plain(String);

    impl Greeter for Plain {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    #[test]
    fn creates_registered_strategy_by_name() {
        let mut registry: Registry<dyn Greeter, String> = Registry::new("greeter");
        registry.register("plain", |who: &String| Ok(Box::new(Plain(who.clone())) as Box<dyn Greeter>));
        let g = registry.create("plain", &"world".to_owned()).unwrap();
        assert_eq!(g.greet(), "hello world");
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        let mut registry: Registry<dyn Greeter, ()> = Registry::new("greeter");
        registry.register("a", |_: &()| Ok(Box::new(Plain("a".into())) as Box<dyn Greeter>));
        registry.register("b", |_: &()| Ok(Box::new(Plain("b".into())) as Box<dyn Greeter>));
        match registry.create("c", &()) {
            Err(Error::UnknownStrategy { kind, name, available }) => {
                assert_eq!(kind, "greeter");
                assert_eq!(name, "c");
                assert_eq!(available, "a, b");
            }
            other => panic!("unexpected {:?}", other.map(|g| g.greet())),
        }
    }
}

//! Configuration-driven pipeline assembly.
//!
//! A config names, per component, the plugins to attach and their options.
//! Factories for the builtin plugins live in a registry keyed by plugin
//! name; naming an unregistered plugin is an error, not a skip.

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::model::Registries;

use super::plugins::{FileSurveyorPlugin, HistogramAdpiPlugin, ReasonerPlugin};
use super::ring::{FileSink, MemorySink, RingBufferForwarder};
use super::{ActivityPlugin, Pipeline, PipelineError};

fn default_async_capacity() -> usize {
    4096
}

fn default_ring_capacity() -> usize {
    1024
}

fn default_cycle_activities() -> u64 {
    1000
}

/// Pipeline-wide knobs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalOptions {
    #[serde(default = "default_async_capacity")]
    pub async_capacity: usize,
    #[serde(default = "default_ring_capacity")]
    pub ring_capacity: usize,
    /// Activities between polling cycles when a driver replays a trace.
    #[serde(default = "default_cycle_activities")]
    pub cycle_activities: u64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions {
            async_capacity: default_async_capacity(),
            ring_capacity: default_ring_capacity(),
            cycle_activities: default_cycle_activities(),
        }
    }
}

/// Which dispatch path a plugin listens on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispatch {
    #[default]
    Sync,
    Async,
}

/// One plugin to instantiate.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginSpec {
    pub name: String,
    #[serde(default)]
    pub options: serde_json::Value,
    #[serde(default)]
    pub dispatch: Dispatch,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub plugins: Vec<PluginSpec>,
}

/// The whole pipeline configuration.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub global: Option<GlobalOptions>,
    #[serde(default)]
    pub components: IndexMap<String, ComponentConfig>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn global(&self) -> GlobalOptions {
        self.global.clone().unwrap_or_default()
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let g = self.global();
        if g.async_capacity < 1 || g.ring_capacity < 1 || g.cycle_activities < 1 {
            return Err(PipelineError::BadConfig(
                "capacities and cycle_activities must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a plugin factory may need.
pub struct FactoryContext<'a> {
    /// Component section the plugin is listed under.
    pub component: &'a str,
    pub options: &'a serde_json::Value,
    pub regs: &'a Registries,
    pub global: &'a GlobalOptions,
}

pub type PluginFactory =
    Box<dyn Fn(&FactoryContext) -> Result<Box<dyn ActivityPlugin>, PipelineError> + Send + Sync>;

/// Parses a plugin's options object, rejecting unknown keys.
pub fn parse_options<T: DeserializeOwned + Default>(
    plugin: &str,
    options: &serde_json::Value,
) -> Result<T, PipelineError> {
    if options.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(options.clone()).map_err(|e| PipelineError::BadOption {
        plugin: plugin.to_string(),
        reason: e.to_string(),
    })
}

/// Name → factory map the loader resolves plugins against.
pub struct PluginRegistry {
    factories: HashMap<String, PluginFactory>,
}

impl PluginRegistry {
    pub fn empty() -> Self {
        PluginRegistry {
            factories: HashMap::new(),
        }
    }

    /// Registry with the builtin plugins: FileSurveyor, HistogramADPI,
    /// Reasoner and RingForwarder.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("FileSurveyor", |ctx| {
            Ok(Box::new(FileSurveyorPlugin::from_context(ctx)?))
        });
        reg.register("HistogramADPI", |ctx| {
            Ok(Box::new(HistogramAdpiPlugin::from_context(ctx)?))
        });
        reg.register("Reasoner", |ctx| {
            Ok(Box::new(ReasonerPlugin::from_context(ctx)?))
        });
        reg.register("RingForwarder", |ctx| {
            #[derive(Debug, Default, Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Options {
                capacity: Option<usize>,
                path: Option<std::path::PathBuf>,
            }
            let opts: Options = parse_options("RingForwarder", ctx.options)?;
            let capacity = opts.capacity.unwrap_or(ctx.global.ring_capacity);
            let sink: Box<dyn super::ActivitySink> = match &opts.path {
                Some(path) => Box::new(FileSink::create(path)?),
                None => Box::new(MemorySink::new()),
            };
            Ok(Box::new(RingBufferForwarder::new(capacity, sink)))
        });
        reg
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&FactoryContext) -> Result<Box<dyn ActivityPlugin>, PipelineError>
            + Send
            + Sync
            + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(
        &self,
        name: &str,
        ctx: &FactoryContext,
    ) -> Result<Box<dyn ActivityPlugin>, PipelineError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| PipelineError::UnknownPlugin(name.to_string()))?;
        factory(ctx)
    }
}

/// Builds a pipeline from a config, instantiating every listed plugin.
pub fn load_pipeline(
    config: &PipelineConfig,
    registry: &PluginRegistry,
    regs: &Registries,
) -> Result<Pipeline, PipelineError> {
    config.validate()?;
    let global = config.global();
    let mut pipeline = Pipeline::new(global.async_capacity);
    pipeline.set_cycle_activities(global.cycle_activities);
    for (component, section) in &config.components {
        for spec in &section.plugins {
            let ctx = FactoryContext {
                component,
                options: &spec.options,
                regs,
                global: &global,
            };
            let plugin = registry.create(&spec.name, &ctx)?;
            match spec.dispatch {
                Dispatch::Sync => pipeline.add_sync(plugin),
                Dispatch::Async => pipeline.add_async(plugin),
            }
        }
    }
    Ok(pipeline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Datatype, Ontology, SystemInfo};

    fn registries() -> Registries {
        let mut ontology = Ontology::new();
        for (domain, name, dt) in [
            ("POSIX/descriptor", "filename", Datatype::Str),
            ("POSIX/descriptor", "filehandle", Datatype::Uint64),
            ("POSIX/file", "position", Datatype::Uint64),
            ("POSIX/quantity", "BytesRead", Datatype::Uint64),
            ("POSIX/quantity", "BytesWritten", Datatype::Uint64),
        ] {
            ontology.register(domain, name, dt).unwrap();
        }
        let mut system = SystemInfo::new();
        system
            .register("POSIX", &["open", "read", "write", "lseek", "close"])
            .unwrap();
        Registries {
            epoch_ns: 0,
            ontology,
            system,
            associations: Default::default(),
        }
    }

    #[test]
    fn listed_plugins_become_sync_listeners() {
        let config = PipelineConfig::from_json(
            r#"{
                "components": {
                    "POSIX": {
                        "plugins": [
                            {"name": "FileSurveyor"},
                            {"name": "HistogramADPI"}
                        ]
                    }
                }
            }"#,
        )
        .unwrap();
        let pipeline = load_pipeline(&config, &PluginRegistry::builtin(), &registries()).unwrap();
        assert_eq!(pipeline.listener_count(), (2, 0));
    }

    #[test]
    fn empty_config_forwards_nothing() {
        let config = PipelineConfig::from_json("{}").unwrap();
        let pipeline = load_pipeline(&config, &PluginRegistry::builtin(), &registries()).unwrap();
        assert_eq!(pipeline.listener_count(), (0, 0));
        let rep = pipeline.report();
        assert_eq!(rep.published, 0);
    }

    #[test]
    fn unknown_plugins_are_an_error_not_a_skip() {
        let config = PipelineConfig::from_json(
            r#"{"components": {"POSIX": {"plugins": [{"name": "NoSuchPlugin"}]}}}"#,
        )
        .unwrap();
        match load_pipeline(&config, &PluginRegistry::builtin(), &registries()) {
            Err(PipelineError::UnknownPlugin(name)) => assert_eq!(name, "NoSuchPlugin"),
            Err(other) => panic!("unexpected error: {other}"),
            Ok(_) => panic!("unknown plugin was accepted"),
        }
    }

    #[test]
    fn unknown_option_keys_are_rejected() {
        let config = PipelineConfig::from_json(
            r#"{"components": {"POSIX": {"plugins": [
                {"name": "FileSurveyor", "options": {"no_such_option": 5}}
            ]}}}"#,
        )
        .unwrap();
        match load_pipeline(&config, &PluginRegistry::builtin(), &registries()) {
            Err(PipelineError::BadOption { plugin, reason }) => {
                assert_eq!(plugin, "FileSurveyor");
                assert!(reason.contains("no_such_option"), "{reason}");
            }
            Err(other) => panic!("unexpected error: {other}"),
            Ok(_) => panic!("unknown option was accepted"),
        }
    }

    #[test]
    fn dispatch_paths_are_honored() {
        let config = PipelineConfig::from_json(
            r#"{"components": {"POSIX": {"plugins": [
                {"name": "FileSurveyor"},
                {"name": "RingForwarder", "dispatch": "async"}
            ]}}}"#,
        )
        .unwrap();
        let pipeline = load_pipeline(&config, &PluginRegistry::builtin(), &registries()).unwrap();
        assert_eq!(pipeline.listener_count(), (1, 1));
    }

    #[test]
    fn bad_capacities_are_refused() {
        let err = PipelineConfig::from_json(r#"{"global": {"async_capacity": 0}}"#);
        assert!(matches!(err, Err(PipelineError::BadConfig(_))));
    }

    #[test]
    fn global_defaults_apply() {
        let config = PipelineConfig::from_json("{}").unwrap();
        let g = config.global();
        assert_eq!(g.async_capacity, 4096);
        assert_eq!(g.ring_capacity, 1024);
        assert_eq!(g.cycle_activities, 1000);
    }
}

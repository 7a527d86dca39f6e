//! Builtin activity plugins.
//!
//! Each wraps one analysis and adapts it to the listener interface: the
//! surveyor keeps per-file access statistics, the histogram plugin
//! categorizes runtimes and hands per-cycle counts to reasoners, and the
//! reasoner merges those counts into an anomaly verdict.

use serde::Deserialize;

use crate::analysis::{
    reason, AdpiAggregate, AnomalySignal, HealthReport, HistogramOptions, ReasonerOptions,
    ReasonerRole, RuntimeHistogram, SpeedCategory, SurveyOptions, SurveyTable,
};
use crate::model::{Activity, ComponentId};
use crate::report::Report;

use super::config::{parse_options, FactoryContext};
use super::{ActivityPlugin, PipelineError};

/// Per-file access statistics for one component layer.
pub struct FileSurveyorPlugin {
    table: SurveyTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurveyorPluginOptions {
    /// Layer to survey; defaults to the component section name.
    layer: Option<String>,
    short_seek_threshold: Option<u64>,
    max_files: Option<usize>,
}

impl FileSurveyorPlugin {
    pub fn from_context(ctx: &FactoryContext) -> Result<Self, PipelineError> {
        let opts: SurveyorPluginOptions = parse_options("FileSurveyor", ctx.options)?;
        let mut survey = SurveyOptions::posix(opts.layer.as_deref().unwrap_or(ctx.component));
        if let Some(threshold) = opts.short_seek_threshold {
            if threshold == 0 {
                return Err(PipelineError::BadOption {
                    plugin: "FileSurveyor".into(),
                    reason: "short_seek_threshold must be positive".into(),
                });
            }
            survey.short_seek_threshold = threshold;
        }
        if let Some(max_files) = opts.max_files {
            survey.max_files = max_files;
        }
        Ok(FileSurveyorPlugin {
            table: SurveyTable::new(&survey, ctx.regs)?,
        })
    }

    pub fn table(&self) -> &SurveyTable {
        &self.table
    }
}

impl ActivityPlugin for FileSurveyorPlugin {
    fn name(&self) -> &str {
        "FileSurveyor"
    }

    fn on_activity(&mut self, activity: &Activity) {
        self.table.update(activity);
    }

    fn report(&self, instance: u32) -> Option<Report> {
        Some(self.table.report(instance))
    }
}

/// Learns per-operation runtime distributions and categorizes each
/// activity against what was learned so far.
pub struct HistogramAdpiPlugin {
    component: ComponentId,
    layer: String,
    histogram: RuntimeHistogram,
    cycle: AdpiAggregate,
    totals: [u64; 5],
    uncategorized: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdpiPluginOptions {
    layer: Option<String>,
    min_samples: Option<usize>,
    max_samples: Option<usize>,
}

impl HistogramAdpiPlugin {
    pub fn from_context(ctx: &FactoryContext) -> Result<Self, PipelineError> {
        let opts: AdpiPluginOptions = parse_options("HistogramADPI", ctx.options)?;
        let layer = opts.layer.as_deref().unwrap_or(ctx.component);
        let component = ctx
            .regs
            .system
            .by_layer(layer)
            .ok_or_else(|| PipelineError::BadOption {
                plugin: "HistogramADPI".into(),
                reason: format!("unknown layer {layer:?}"),
            })?
            .id;
        let mut hist_opts = HistogramOptions::default();
        if let Some(min) = opts.min_samples {
            hist_opts.min_samples = min;
        }
        if let Some(max) = opts.max_samples {
            hist_opts.max_samples = max;
        }
        if hist_opts.min_samples < 1 || hist_opts.max_samples < hist_opts.min_samples {
            return Err(PipelineError::BadOption {
                plugin: "HistogramADPI".into(),
                reason: "need 1 <= min_samples <= max_samples".into(),
            });
        }
        Ok(HistogramAdpiPlugin {
            component,
            layer: layer.to_string(),
            histogram: RuntimeHistogram::new(hist_opts),
            cycle: AdpiAggregate::default(),
            totals: [0; 5],
            uncategorized: 0,
        })
    }

    pub fn histogram(&self) -> &RuntimeHistogram {
        &self.histogram
    }

    pub fn totals(&self) -> [u64; 5] {
        self.totals
    }
}

impl ActivityPlugin for HistogramAdpiPlugin {
    fn name(&self) -> &str {
        "HistogramADPI"
    }

    fn on_activity(&mut self, activity: &Activity) {
        if activity.component != self.component {
            self.uncategorized += 1;
            return;
        }
        let runtime = activity.duration_ns();
        // Categorize against the distribution before this observation
        // joins it, so an activity never grades itself.
        match self.histogram.categorize(activity.ucaid, runtime) {
            Ok(category) => {
                self.cycle.add(category);
                self.totals[category.index()] += 1;
            }
            Err(_) => self.uncategorized += 1,
        }
        self.histogram.learn(activity.ucaid, runtime);
    }

    fn cycle_aggregate(&mut self) -> Option<AdpiAggregate> {
        Some(std::mem::take(&mut self.cycle))
    }

    fn report(&self, instance: u32) -> Option<Report> {
        let mut report = Report::new("HistogramADPI", instance, &self.layer);
        for category in SpeedCategory::ALL {
            report.put_num(
                "Categories",
                category.label(),
                self.totals[category.index()] as f64,
            );
        }
        report.put_num("Categories", "uncategorized", self.uncategorized as f64);
        report.put_num("Learning", "operations", self.histogram.kind_count() as f64);
        Some(report)
    }
}

/// Merges per-cycle category counts and raises anomaly signals.
pub struct ReasonerPlugin {
    role: ReasonerRole,
    id: String,
    options: ReasonerOptions,
    last_health: Option<HealthReport>,
    cycles: u64,
    signals: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReasonerPluginOptions {
    role: Option<String>,
    id: Option<String>,
    trigger_fraction: Option<f64>,
    min_activities: Option<u64>,
}

impl ReasonerPlugin {
    pub fn from_context(ctx: &FactoryContext) -> Result<Self, PipelineError> {
        let opts: ReasonerPluginOptions = parse_options("Reasoner", ctx.options)?;
        let role = match opts.role.as_deref() {
            None | Some("process") => ReasonerRole::Process,
            Some("node") => ReasonerRole::Node,
            Some("system") => ReasonerRole::System,
            Some(other) => {
                return Err(PipelineError::BadOption {
                    plugin: "Reasoner".into(),
                    reason: format!("unknown role {other:?}"),
                })
            }
        };
        let mut options = ReasonerOptions::default();
        if let Some(fraction) = opts.trigger_fraction {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(PipelineError::BadOption {
                    plugin: "Reasoner".into(),
                    reason: "trigger_fraction must be within [0, 1]".into(),
                });
            }
            options.trigger_fraction = fraction;
        }
        if let Some(min) = opts.min_activities {
            options.min_activities = min;
        }
        Ok(ReasonerPlugin {
            role,
            id: opts.id.unwrap_or_else(|| ctx.component.to_string()),
            options,
            last_health: None,
            cycles: 0,
            signals: 0,
        })
    }

    pub fn last_health(&self) -> Option<&HealthReport> {
        self.last_health.as_ref()
    }
}

impl ActivityPlugin for ReasonerPlugin {
    fn name(&self) -> &str {
        "Reasoner"
    }

    fn on_activity(&mut self, _activity: &Activity) {}

    fn on_cycle(&mut self, cycle_t_ns: u64, aggregates: &[AdpiAggregate]) -> Vec<AnomalySignal> {
        self.cycles += 1;
        let (health, signal) = reason(
            self.role,
            &self.id,
            cycle_t_ns,
            aggregates,
            &[],
            &self.options,
        );
        self.last_health = Some(health);
        match signal {
            Some(signal) => {
                self.signals += 1;
                vec![signal]
            }
            None => Vec::new(),
        }
    }

    fn report(&self, instance: u32) -> Option<Report> {
        let mut report = Report::new("Reasoner", instance, &self.id);
        report.put_num("Cycles", "observed", self.cycles as f64);
        report.put_num("Cycles", "anomalous", self.signals as f64);
        if let Some(health) = &self.last_health {
            for category in SpeedCategory::ALL {
                report.put_num(
                    "Last cycle",
                    category.label(),
                    health.counts[category.index()] as f64,
                );
            }
        }
        Some(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActivityFactory, AttrValue, Datatype, Ontology, Registries, SystemInfo};
    use crate::pipeline::config::GlobalOptions;
    use crate::report::ReportValue;

    struct Fixture {
        regs: Registries,
        factory: ActivityFactory,
    }

    impl Fixture {
        fn new() -> Self {
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
            Fixture {
                regs: Registries {
                    epoch_ns: 0,
                    ontology,
                    system,
                    associations: Default::default(),
                },
                factory: ActivityFactory::new(),
            }
        }

        fn context<'a>(
            &'a self,
            component: &'a str,
            options: &'a serde_json::Value,
            global: &'a GlobalOptions,
        ) -> FactoryContext<'a> {
            FactoryContext {
                component,
                options,
                regs: &self.regs,
                global,
            }
        }

        fn read(&mut self, t0: u64, t1: u64) -> Activity {
            let component = self.regs.system.by_layer("POSIX").unwrap().id;
            let handle = self
                .regs
                .ontology
                .lookup("POSIX/descriptor", "filehandle")
                .unwrap();
            self.factory
                .build(
                    &self.regs,
                    7,
                    component,
                    crate::model::Ucaid(1),
                    t0,
                    t1,
                    vec![(handle, AttrValue::Uint64(3))],
                    vec![],
                    0,
                )
                .unwrap()
        }
    }

    fn num(report: &Report, group: &str, field: &str) -> f64 {
        match report.get(group, field) {
            Some(ReportValue::Num(v)) => *v,
            other => panic!("no numeric {group}/{field}: {other:?}"),
        }
    }

    #[test]
    fn adpi_never_grades_an_activity_against_itself() {
        let mut fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"min_samples": 3});
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            HistogramAdpiPlugin::from_context(&ctx).unwrap()
        };
        // First three observations cannot be categorized: the histogram is
        // below its floor when each arrives.
        for t in [100u64, 200, 300] {
            let a = fx.read(0, t);
            plugin.on_activity(&a);
        }
        assert_eq!(plugin.totals().iter().sum::<u64>(), 0);
        assert_eq!(plugin.uncategorized, 3);
        let a = fx.read(0, 250);
        plugin.on_activity(&a);
        assert_eq!(plugin.totals().iter().sum::<u64>(), 1);
    }

    #[test]
    fn adpi_cycle_aggregate_drains() {
        let mut fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"min_samples": 2});
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            HistogramAdpiPlugin::from_context(&ctx).unwrap()
        };
        for t in [100u64, 200, 300, 400] {
            let a = fx.read(0, t);
            plugin.on_activity(&a);
        }
        let agg = plugin.cycle_aggregate().unwrap();
        assert_eq!(agg.categorized(), 2);
        let empty = plugin.cycle_aggregate().unwrap();
        assert_eq!(empty.categorized(), 0);
    }

    #[test]
    fn adpi_ignores_other_layers() {
        let mut fx = Fixture::new();
        fx.regs.system.register("MPI", &["File_read"]).unwrap();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"layer": "MPI", "min_samples": 1});
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            HistogramAdpiPlugin::from_context(&ctx).unwrap()
        };
        let a = fx.read(0, 100);
        plugin.on_activity(&a);
        plugin.on_activity(&a);
        assert_eq!(plugin.histogram().kind_count(), 0);
        assert_eq!(plugin.uncategorized, 2);
    }

    #[test]
    fn adpi_report_counts_categories() {
        let mut fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"min_samples": 2});
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            HistogramAdpiPlugin::from_context(&ctx).unwrap()
        };
        for t in [100u64, 200, 300, 400] {
            let a = fx.read(0, t);
            plugin.on_activity(&a);
        }
        let report = plugin.report(3).unwrap();
        assert_eq!(report.source.instance, 3);
        assert_eq!(num(&report, "Categories", "uncategorized"), 2.0);
        assert_eq!(num(&report, "Learning", "operations"), 1.0);
        let categorized: f64 = SpeedCategory::ALL
            .iter()
            .map(|c| num(&report, "Categories", c.label()))
            .sum();
        assert_eq!(categorized, 2.0);
    }

    #[test]
    fn reasoner_signals_and_reports() {
        let fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"role": "node", "id": "node03", "min_activities": 5});
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            ReasonerPlugin::from_context(&ctx).unwrap()
        };
        let quiet = AdpiAggregate {
            counts: [5, 0, 0, 0, 0],
        };
        assert!(plugin.on_cycle(1_000, &[quiet]).is_empty());
        let noisy = AdpiAggregate {
            counts: [0, 0, 2, 0, 8],
        };
        let signals = plugin.on_cycle(2_000, &[noisy]);
        assert_eq!(signals.len(), 1);
        assert_eq!(signals[0].reasoner, "node03");
        assert_eq!(signals[0].scope, ReasonerRole::Node);
        let report = plugin.report(0).unwrap();
        assert_eq!(num(&report, "Cycles", "observed"), 2.0);
        assert_eq!(num(&report, "Cycles", "anomalous"), 1.0);
        assert_eq!(num(&report, "Last cycle", "very-slow"), 8.0);
    }

    #[test]
    fn reasoner_rejects_bad_options() {
        let fx = Fixture::new();
        let global = GlobalOptions::default();
        for options in [
            serde_json::json!({"role": "galaxy"}),
            serde_json::json!({"trigger_fraction": 1.5}),
        ] {
            let ctx = fx.context("POSIX", &options, &global);
            assert!(matches!(
                ReasonerPlugin::from_context(&ctx).map(|_| ()),
                Err(PipelineError::BadOption { .. })
            ));
        }
    }

    #[test]
    fn surveyor_rejects_nonpositive_threshold() {
        let fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::json!({"short_seek_threshold": 0});
        let ctx = fx.context("POSIX", &options, &global);
        assert!(matches!(
            FileSurveyorPlugin::from_context(&ctx).map(|_| ()),
            Err(PipelineError::BadOption { .. })
        ));
    }

    #[test]
    fn surveyor_counts_through_plugin_interface() {
        let mut fx = Fixture::new();
        let global = GlobalOptions::default();
        let options = serde_json::Value::Null;
        let mut plugin = {
            let ctx = fx.context("POSIX", &options, &global);
            FileSurveyorPlugin::from_context(&ctx).unwrap()
        };
        let a = fx.read(0, 100);
        plugin.on_activity(&a);
        // Handle 3 was never opened, so the access lands in the unknown
        // counter rather than a file row.
        assert_eq!(plugin.table().unknown_handle_count(), 1);
        assert!(plugin.report(0).is_some());
    }
}

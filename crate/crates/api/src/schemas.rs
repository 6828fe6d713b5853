macro_rules! schemas {
    ($($name:literal),* $(,)?) => {
        /// Response schemas by name, as shipped under `docs/schemas`.
        pub const SCHEMAS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../../docs/schemas/", $name, ".json")))),*
        ];
    };
}

schemas!(
    "error",
    "summary",
    "columns",
    "column_kpi",
    "boxplot",
    "histogram",
    "heatmap",
    "missing_timestamps",
    "violations",
    "correlation",
    "scatter",
    "timeseries",
    "meter_stats_page",
    "report",
);

pub fn schema(name: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

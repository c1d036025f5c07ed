//! Plain-text cluster report.

use std::fmt::Write;

use forestview_core::{ClusterCurve, Clustering};

/// Three tab-separated sections: clusters, per-tree labels, and the curve
/// with the default minimum size marked `*`.
pub fn cluster_report(c: &Clustering, curve: &ClusterCurve) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# min_size {} clusters {}", c.min_cluster_size, c.clusters.len());
    out.push_str("cluster\tsize\tmedoid\tmembers\n");
    for cl in &c.clusters {
        let members: Vec<String> = cl.members.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", cl.id, cl.members.len(), cl.medoid, members.join(","));
    }
    out.push_str("\ntree\tcluster\n");
    for (t, l) in c.labels.iter().enumerate() {
        let _ = writeln!(out, "{t}\t{l}");
    }
    out.push_str("\nmin_size\tclusters\n");
    for p in &curve.samples {
        let mark = if p.min_size == curve.default_min_size { "\t*" } else { "" };
        let _ = writeln!(out, "{}\t{}{mark}", p.min_size, p.clusters);
    }
    out
}

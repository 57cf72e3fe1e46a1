#!/usr/bin/env python3
"""Print the full capacity-planning table for the default survey parameters.

Usage: python3 scripts/paper_numbers.py
"""

from skymine import planner, units


def main() -> None:
    acq = planner.plan_acquisition(planner.AcquisitionSpec())
    sto = planner.plan_storage(planner.StorageSpec())
    rows = [
        ("raw bytes per pass", units.fmt_bytes(acq.bytes_per_pass)),
        ("raw bytes per year", units.fmt_bytes(acq.bytes_per_year)),
        ("raw bytes per night", units.fmt_bytes(acq.bytes_per_night)),
        ("acquisition stream rate", units.fmt_bytes(acq.stream_rate) + "/s"),
        ("pipeline CPUs, today",
         str(planner.plan_pipeline(planner.PipelineSpec(acq.stream_rate)))),
        ("pipeline CPUs, +6 years",
         str(planner.plan_pipeline(planner.PipelineSpec(acq.stream_rate,
                                                        years_ahead=6.0)))),
        ("catalog size", units.fmt_bytes(sto.catalog_bytes)),
        ("catalog + indexes", units.fmt_bytes(sto.indexed_bytes)),
        ("master summary", units.fmt_bytes(sto.master_bytes)),
        ("coadd stack", units.fmt_bytes(sto.coadd_bytes)),
    ]
    scan30 = planner.plan_scan(planner.ScanSpec(sto.indexed_bytes))
    scan240 = planner.plan_scan(planner.ScanSpec(sto.indexed_bytes, disk_count=240))
    master_scan = planner.plan_scan(planner.ScanSpec(sto.master_bytes, disk_count=500))
    rows += [
        ("full scan, 30 disks", f"{scan30.scan_seconds / 3600:.2f} h "
                                f"({scan30.servers_needed} server)"),
        ("full scan, 240 disks", f"{scan240.scan_seconds / 3600:.2f} h "
                                 f"({scan240.servers_needed} servers)"),
        ("master scan, 500 disks", f"{master_scan.scan_seconds:.1f} s"),
    ]
    xfer = planner.plan_transfer(planner.TransferSpec(165e12))
    bricks = planner.plan_transfer(planner.TransferSpec(160e12))
    load = planner.plan_load(sto.indexed_bytes, 14.0, bricks=8)
    rows += [
        ("network replication, 165 TB", f"{xfer.network_days:.1f} days"),
        ("sneakernet bricks, 160 TB", f"{bricks.brick_count} bricks, "
                                      f"{bricks.sneakernet_days:.0f} days"),
        ("two-week reload rate", units.fmt_bytes(load.rate_total) + "/s"),
        ("per-brick reload rate", units.fmt_bytes(load.rate_per_brick) + "/s"),
        ("peak live-load rate",
         units.fmt_bytes(planner.plan_peak_load(acq.stream_rate)) + "/s"),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {value}")

    print()
    print("hardware timeline (factors relative to year 1)")
    print("year  cpu_speed  pipeline_cpus  analysis_cpus  disks  stored")
    for year in range(1, 7):
        r = planner.plan_hardware_timeline(year)
        print(f"{year:>4}  {r.cpu_speed_factor:>9.2f}  {r.pipeline_cpu_factor:>13.3f}"
              f"  {r.analysis_cpu_factor:>13.3f}  {r.disk_count_factor:>5.2f}"
              f"  {r.stored_bytes_factor:>6.1f}")


if __name__ == "__main__":
    main()

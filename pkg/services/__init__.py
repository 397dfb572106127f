# Services package: export_service (CSV / JSON artifacts and sidecars)

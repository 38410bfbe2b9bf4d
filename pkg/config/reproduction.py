"""
Published clearing results reproduced by the bundled scenarios

Each case names a bundled scenario, the overrides applied to it, and the
cells to compare as (quantity, item, published value, tolerance). Published
values are rounded to their printed precision; tolerances reflect that.
"""

EXACT = 1e-6

REPRODUCTION_TABLES = {
    3: {
        "description": "Single FR service, low demand",
        "scenario": "ed_single_fr.json",
        "demand": 250.0,
        "cells": [
            ("power_mw", "nuclear", 100.0, 0.1),
            ("power_mw", "type1", 150.0, 0.1),
            ("power_mw", "type2", 0.0, 0.1),
            ("fr_mw", "type1", 197.0, 1.0),
            ("fr_mw", "type2", 175.0, 1.0),
            ("energy_price", "", 17.0, 0.01),
            ("fr_price", "PFR", 0.0, 0.01),
        ],
    },
    4: {
        "description": "Single FR service, high demand",
        "scenario": "ed_single_fr.json",
        "demand": 400.0,
        "cells": [
            ("power_mw", "nuclear", 100.0, 0.5),
            ("power_mw", "type1", 203.0, 0.5),
            ("power_mw", "type2", 97.0, 0.5),
            ("energy_price", "", 18.0, 0.01),
            ("fr_price", "PFR", 1.0, 0.01),
            ("profit", "nuclear", 300.0, 1.0),
            ("profit", "type1", 400.0, 1.0),
            ("profit", "type2", 175.0, 1.0),
        ],
    },
    6: {
        "description": "Two FR speeds",
        "scenario": "ed_multi_speed.json",
        "demand": 400.0,
        "cells": [
            ("fr_mw", "type1", 225.0, 0.1),
            ("fr_mw", "type2", 50.6, 0.1),
            ("energy_price", "", 19.0, 0.01),
            ("fr_price", "FR1", 1.4, 0.05),
            ("fr_price", "FR2", 1.0, 0.01),
        ],
    },
    7: {
        "description": "Two FR speeds, FR1 delayed by 0.4 s",
        "scenario": "ed_delayed_fr.json",
        "demand": 400.0,
        "cells": [
            ("power_mw", "nuclear", 100.0, 0.2),
            ("power_mw", "type1", 143.5, 0.2),
            ("power_mw", "type2", 156.5, 0.2),
            ("fr_price", "FR1", 0.99, 0.01),
            ("fr_price", "FR2", 1.0, 0.01),
        ],
    },
    9: {
        "description": "Reduced largest loss, nuclear MSG 90 MW",
        "scenario": "ed_reduced_loss_msg90.json",
        "demand": 400.0,
        "cells": [
            ("power_mw", "nuclear", 93.0, 0.2),
            ("reduced_loss_price", "", 4.0, 0.05),
            ("fr_price", "FR1", 0.83, 0.02),
            ("fr_price", "FR2", 0.58, 0.02),
            ("loss_payment", "nuclear", 28.0, 1.0),
        ],
    },
    11: {
        "description": "Reduced largest loss, nuclear MSG 95 MW, uncapped payment",
        "scenario": "ed_reduced_loss_msg95.json",
        "demand": 400.0,
        "uncapped_loss_payment": True,
        "cells": [
            ("power_mw", "nuclear", 95.0, 0.01),
            ("reduced_loss_price", "", 7.1, 0.1),
            ("fr_price", "FR1", 1.4, 0.05),
            ("fr_price", "FR2", 1.0, 0.01),
            ("fr_mw", "type2", 14.3, 0.2),
            ("loss_payment", "nuclear", 35.5, 0.5),
        ],
    },
    13: {
        "description": "UC, low RES",
        "scenario": "uc_thermal_fleet.json",
        "res": 10000.0,
        "cells": [
            ("online_units", "nuclear", 1.0, EXACT),
            ("online_units", "type1", 24.0, EXACT),
            ("online_units", "type2", 30.0, EXACT),
            ("energy_price", "", 95.79, 0.05),
            ("inertia_price", "", 0.041, 0.002),
            ("fr_price", "FR1", 0.79, 0.02),
            ("fr_price", "FR2", 0.55, 0.02),
            ("curtailment_mw", "", 0.0, 50.0),
        ],
    },
    14: {
        "description": "UC, low RES, type2 inertia constant 6 s",
        "scenario": "uc_thermal_fleet_h6.json",
        "res": 10000.0,
        "cells": [
            ("online_units", "nuclear", 1.0, EXACT),
            ("online_units", "type1", 24.0, EXACT),
            ("online_units", "type2", 30.0, EXACT),
            ("energy_price", "", 95.80, 0.05),
            ("inertia_price", "", 0.039, 0.002),
            ("fr_price", "FR1", 0.81, 0.02),
            ("fr_price", "FR2", 0.56, 0.02),
        ],
    },
    15: {
        "description": "UC, high RES",
        "scenario": "uc_thermal_fleet.json",
        "res": 18000.0,
        "cells": [
            ("online_units", "nuclear", 1.0, EXACT),
            ("online_units", "type1", 17.0, EXACT),
            ("online_units", "type2", 27.0, EXACT),
            ("energy_price", "", 0.0, 0.01),
            ("inertia_price", "", 4.6, 0.1),
            ("fr_price", "FR1", 51.2, 0.5),
            ("fr_price", "FR2", 35.9, 0.5),
            ("curtailment_mw", "", 2100.0, 50.0),
        ],
    },
    16: {
        "description": "UC, high RES, type2 inertia constant 6 s",
        "scenario": "uc_thermal_fleet_h6.json",
        "res": 18000.0,
        "reference": 15,
        "cells": [
            ("online_units", "nuclear", 1.0, EXACT),
            ("online_units", "type1", 16.0, EXACT),
            ("online_units", "type2", 28.0, EXACT),
            ("curtailment_mw", "", 1900.0, 50.0),
            ("inertia_price", "", 4.4, 0.1),
            ("fr_price", "FR1", 53.1, 0.5),
            ("fr_price", "FR2", 37.1, 0.5),
            # profit of type2 relative to the reference case
            ("profit_ratio", "type2", 1.385, 0.035),
        ],
    },
}

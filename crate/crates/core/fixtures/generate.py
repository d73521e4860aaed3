"""Regenerates ttbs.json and cocome.json.

Annotation values are synthetic. They were tuned so that every loaded node
starts between 30% and 80% utilization and the CoCoME system reliability
starts at about 0.75. Run from this directory: python3 generate.py
"""

import json

ACTOR = "@actor"


def build(components, nodes, links, scenarios, deployment):
    ops = {}
    for s in scenarios:
        for m in s["messages"]:
            ops.setdefault(m["callee"], []).append((m["operation"], m.pop("demand")))
    comps = []
    for cid, theta in components:
        comps.append(
            {
                "id": cid,
                "operations": [{"id": o, "serviceDemand": d} for o, d in ops.get(cid, [])],
                "failureProb": theta,
            }
        )
    return {
        "components": comps,
        "nodes": [{"id": n, "multiplicity": m, "speedFactor": s} for n, m, s in nodes],
        "links": [
            {"id": f"{a}--{b}", "endpoints": [a, b], "failureProb": psi} for a, b, psi in links
        ],
        "scenarios": scenarios,
        "deployment": deployment,
    }


def msg(caller, callee, op, demand, size, reps=1):
    return {
        "caller": caller,
        "callee": callee,
        "operation": op,
        "size": size,
        "repetitions": reps,
        "demand": demand,
    }


def reliability(model):
    theta = {c["id"]: c["failureProb"] for c in model["components"]}
    dep = model["deployment"]
    psi = {tuple(sorted(l["endpoints"])): l["failureProb"] for l in model["links"]}
    total = 0.0
    for s in model["scenarios"]:
        r = 1.0
        for m in s["messages"]:
            r *= (1 - theta[m["callee"]]) ** m["repetitions"]
            if m["caller"] != ACTOR:
                a, b = dep[m["caller"]], dep[m["callee"]]
                if a != b:
                    r *= (1 - psi[tuple(sorted((a, b)))]) ** (m["size"] * m["repetitions"])
        total += s["prob"] * r
    return total


def ttbs():
    names = [
        ("auth", 0.012),
        ("verification", 0.008),
        ("user", 0.015),
        ("admin", 0.010),
        ("rebook", 0.014),
        ("order", 0.011),
        ("travel", 0.013),
        ("station", 0.009),
        ("price", 0.009),
        ("payment", 0.012),
        ("notification", 0.007),
    ]
    nodes = [(f"{c}-host", 1, 1.0) for c, _ in names]
    nodes[2] = ("user-host", 2, 1.0)
    nodes[6] = ("travel-host", 1, 1.25)
    deployment = {c: f"{c}-host" for c, _ in names}
    links = [
        ("auth-host", "verification-host", 0.004),
        ("auth-host", "user-host", 0.005),
        ("admin-host", "user-host", 0.005),
        ("rebook-host", "order-host", 0.004),
        ("rebook-host", "travel-host", 0.006),
        ("travel-host", "station-host", 0.003),
        ("travel-host", "price-host", 0.003),
        ("order-host", "payment-host", 0.004),
        ("order-host", "notification-host", 0.003),
    ]
    scenarios = [
        {
            "id": "login",
            "prob": 0.5,
            "workload": {"type": "closed", "population": 30, "thinkTime": 1.0},
            "messages": [
                msg(ACTOR, "auth", "login", 0.020, 2.0),
                msg("auth", "verification", "verifyCode", 0.015, 1.0),
                msg("auth", "user", "findUser", 0.024, 3.0),
            ],
        },
        {
            "id": "rebook",
            "prob": 0.4,
            "workload": {"type": "closed", "population": 20, "thinkTime": 1.0},
            "messages": [
                msg(ACTOR, "rebook", "rebookTicket", 0.025, 4.0),
                msg("rebook", "order", "getOrder", 0.020, 3.0),
                msg("rebook", "travel", "queryTrip", 0.036, 5.0),
            ],
        },
        {
            "id": "update-user-details",
            "prob": 0.1,
            "workload": {"type": "closed", "population": 12, "thinkTime": 1.0},
            "messages": [
                msg(ACTOR, "admin", "updateUser", 0.030, 2.0),
                msg("admin", "user", "saveUser", 0.040, 4.0),
            ],
        },
    ]
    return build(names, nodes, links, scenarios, deployment)


def cocome():
    names = [
        ("cashDesk", 0.018),
        ("cashBox", 0.010),
        ("barcodeScanner", 0.012),
        ("printer", 0.014),
        ("cardReader", 0.016),
        ("bank", 0.020),
        ("storeApp", 0.022),
        ("stockManager", 0.016),
        ("enterpriseApp", 0.014),
        ("reporting", 0.012),
        ("dataAccess", 0.020),
        ("productCatalog", 0.014),
        ("webFrontend", 0.010),
    ]
    nodes = [
        ("cashDeskPC", 1, 1.0),
        ("cardTerminal", 1, 0.8),
        ("bankServer", 1, 1.0),
        ("storeServer", 2, 1.0),
        ("enterpriseServer", 2, 1.2),
        ("dbServer", 2, 2.0),
        ("catalogServer", 1, 1.0),
        ("webServer", 1, 1.0),
    ]
    deployment = {
        "cashDesk": "cashDeskPC",
        "cashBox": "cashDeskPC",
        "barcodeScanner": "cashDeskPC",
        "printer": "cashDeskPC",
        "cardReader": "cardTerminal",
        "bank": "bankServer",
        "storeApp": "storeServer",
        "stockManager": "storeServer",
        "enterpriseApp": "enterpriseServer",
        "reporting": "enterpriseServer",
        "dataAccess": "dbServer",
        "productCatalog": "catalogServer",
        "webFrontend": "webServer",
    }
    links = [
        ("cashDeskPC", "cardTerminal", 0.006),
        ("cardTerminal", "bankServer", 0.010),
        ("cashDeskPC", "storeServer", 0.008),
        ("storeServer", "catalogServer", 0.006),
        ("catalogServer", "dbServer", 0.005),
        ("storeServer", "dbServer", 0.006),
        ("enterpriseServer", "catalogServer", 0.006),
        ("enterpriseServer", "storeServer", 0.007),
        ("enterpriseServer", "dbServer", 0.005),
        ("webServer", "enterpriseServer", 0.008),
    ]
    scenarios = [
        {
            "id": "UC1-checkout-sale",
            "prob": 0.6,
            "workload": {"type": "closed", "population": 20, "thinkTime": 4.0},
            "messages": [
                msg(ACTOR, "cashDesk", "startSale", 0.030, 1.0),
                msg("cashDesk", "barcodeScanner", "scanItem", 0.020, 0.5, 4),
                msg("cashDesk", "storeApp", "getProductInfo", 0.040, 2.0, 2),
                msg("storeApp", "productCatalog", "lookupProduct", 0.050, 2.0),
                msg("productCatalog", "dataAccess", "queryProduct", 0.120, 3.0),
                msg("cashDesk", "cardReader", "readCard", 0.080, 1.0),
                msg("cardReader", "bank", "authorizePayment", 0.120, 2.0),
                msg("cashDesk", "printer", "printReceipt", 0.050, 0.0),
                msg("cashDesk", "storeApp", "bookSale", 0.060, 3.0),
                msg("storeApp", "stockManager", "updateStock", 0.050, 0.0),
                msg("stockManager", "dataAccess", "persistSale", 0.150, 4.0),
            ],
        },
        {
            "id": "UC4-product-registration",
            "prob": 0.25,
            "workload": {"type": "closed", "population": 6, "thinkTime": 5.0},
            "messages": [
                msg(ACTOR, "enterpriseApp", "registerProduct", 0.200, 2.0),
                msg("enterpriseApp", "productCatalog", "addProduct", 0.250, 3.0),
                msg("productCatalog", "dataAccess", "insertProduct", 0.300, 3.0),
                msg("enterpriseApp", "stockManager", "initStock", 0.200, 2.0),
                msg("stockManager", "dataAccess", "insertStockItem", 0.300, 2.0),
            ],
        },
        {
            "id": "UC5-report",
            "prob": 0.15,
            "workload": {"type": "open", "arrivalRate": 1.5},
            "messages": [
                msg(ACTOR, "webFrontend", "requestReport", 0.500, 2.0),
                msg("webFrontend", "reporting", "generateReport", 0.300, 6.0),
                msg("reporting", "dataAccess", "queryStock", 0.250, 5.0),
                msg("reporting", "enterpriseApp", "listStores", 0.150, 1.0),
            ],
        },
    ]
    return build(names, nodes, links, scenarios, deployment)


if __name__ == "__main__":
    for name, model in (("ttbs", ttbs()), ("cocome", cocome())):
        with open(f"{name}.json", "w") as f:
            json.dump(model, f, indent=2)
            f.write("\n")
        print(f"{name}: reliability {reliability(model):.4f}")

"""Simulated apps: small screen state machines standing in for real devices.

Each bundled app is built from a per-user profile, so two users get the same
structure with different personal strings. A blueprint bundles the sampler,
the builder, and the canonical demonstration for that app's task; the harness
uses these to generate whole populations with known ground truth.
"""

import random
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import DocumentError
from .screens import AppContext, UiElement, element_document, load_screen
from .scripting import DemoEvent, OpKind, ScreenSnapshot


@dataclass(frozen=True)
class SimulatedApp:
    package: str
    screens: Mapping[str, ScreenSnapshot]
    transitions: Mapping[tuple[str, str, OpKind], str]
    initial: str

    def __post_init__(self):
        if self.initial not in self.screens:
            raise DocumentError(f"initial screen {self.initial!r} does not exist")
        for (src, element, _), dst in self.transitions.items():
            if src not in self.screens:
                raise DocumentError(f"transition from unknown screen {src!r}")
            if dst not in self.screens:
                raise DocumentError(f"transition to unknown screen {dst!r}")
            if self.screens[src].find(element) is None:
                raise DocumentError(
                    f"transition from {src!r} uses unknown element {element!r}")
        for name, snap in self.screens.items():
            if snap.context.package_name != self.package:
                raise DocumentError(
                    f"screen {name!r} belongs to {snap.context.package_name!r},"
                    f" not {self.package!r}")

    def launch_context(self) -> AppContext:
        return self.screens[self.initial].context


def app_document(app: SimulatedApp) -> dict[str, Any]:
    return {
        "package": app.package,
        "initial": app.initial,
        "screens": {
            name: {"activity": snap.context.activity_name,
                   "root": element_document(snap.root)}
            for name, snap in sorted(app.screens.items())},
        "transitions": [
            {"from": src, "element": element, "action": kind.value, "to": dst}
            for (src, element, kind), dst in sorted(
                app.transitions.items(),
                key=lambda item: (item[0][0], item[0][1], item[0][2].value))],
    }


def load_app(document: Mapping[str, Any]) -> SimulatedApp:
    if not isinstance(document, Mapping):
        raise DocumentError("app document must be an object")
    package = document.get("package")
    if not isinstance(package, str) or not package:
        raise DocumentError("app document needs a package", "package")
    screens_doc = document.get("screens")
    if not isinstance(screens_doc, Mapping) or not screens_doc:
        raise DocumentError("app document needs screens", "screens")
    screens = {}
    for name, sdoc in screens_doc.items():
        path = f"screens[{name}]"
        if not isinstance(sdoc, Mapping):
            raise DocumentError("screen must be an object", path)
        activity = sdoc.get("activity")
        if not isinstance(activity, str):
            raise DocumentError("screen needs an activity", f"{path}.activity")
        root = load_screen(sdoc)
        screens[name] = ScreenSnapshot(AppContext(package, activity), root)
    transitions = {}
    for i, tdoc in enumerate(document.get("transitions", [])):
        path = f"transitions[{i}]"
        try:
            kind = OpKind(tdoc["action"])
            key = (tdoc["from"], tdoc["element"], kind)
            transitions[key] = tdoc["to"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad transition: {exc}", path) from exc
    initial = document.get("initial")
    if not isinstance(initial, str):
        raise DocumentError("app document needs an initial screen", "initial")
    return SimulatedApp(package=package, screens=screens,
                        transitions=transitions, initial=initial)


# ---------------------------------------------------------------------------
# Profile sampling
# ---------------------------------------------------------------------------

_FIRST = ["Avery", "Jordan", "Riley", "Morgan", "Casey", "Quinn", "Harper",
          "Rowan", "Skyler", "Emerson", "Dakota", "Finley"]
_LAST = ["Whitfield", "Okafor", "Lindqvist", "Marchetti", "Devereaux",
         "Nakamura", "Oyelaran", "Castellanos", "Brightwater", "Fenwick",
         "Abernathy", "Kowalczyk"]
_STREETS = ["Larkspur Hollow Road", "Quicksilver Terrace", "Bramblewood Lane",
            "Coppersmith Avenue", "Nightingale Crescent", "Juniper Hollow",
            "Saltmarsh Boulevard", "Thistledown Court"]
_MERCHANTS = ["Vesper Coffee Roasters", "Gilded Spoon Bistro",
              "Crooked Pine Books", "Meridian Grocers", "Bluebell Florist",
              "Harbor Lights Diner", "Topographic Outfitters",
              "Saffron Alley Kitchen"]
_STORES = ["Elm & 5th", "Harborview Plaza", "Old Mill Crossing",
           "Cedar Point Market", "Union Depot Hall", "Foxglove Square"]
_VENUES = ["Glasshouse Botanic Garden", "Pier 9 Overlook",
           "The Copper Kettle", "Aurora Science Museum",
           "Lantern Row Night Market", "Southbank Amphitheater"]


def _person(rng: random.Random) -> str:
    return f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"


def _address(rng: random.Random) -> str:
    return f"{rng.randint(12, 9890)} {rng.choice(_STREETS)}"


def _money(rng: random.Random) -> str:
    return f"${rng.randint(1, 9)},{rng.randint(0, 999):03d}.{rng.randint(0, 99):02d}"


def sample_banking_profile(rng: random.Random) -> dict[str, str]:
    profile = {
        "owner_name": _person(rng),
        "avatar_desc": "",
        "checking": f"Checking Account (...{rng.randint(1000, 9999)})",
        "saving": f"Saving Account (...{rng.randint(1000, 9999)})",
        "balance": _money(rng),
    }
    profile["avatar_desc"] = f"Profile photo of {profile['owner_name']}"
    for i in range(1, 13):
        merchant = rng.choice(_MERCHANTS)
        profile[f"txn{i}"] = f"{merchant} #{rng.randint(100, 999)}"
        profile[f"txn{i}_amt"] = f"-${rng.randint(3, 420)}.{rng.randint(0, 99):02d}"
    return profile


def sample_coffee_profile(rng: random.Random) -> dict[str, str]:
    name = _person(rng)
    return {
        "greeting": f"Hi, {name.split()[0]} {name.split()[1]}",
        "points": f"{rng.randint(105, 9870)} stars",
        "pickup": f"Pickup at {rng.choice(_STORES)} "
                  f"(kiosk {rng.randint(2, 98)})",
        "promo": "Pumpkin spice is back for the season!",
    }


def sample_ride_profile(rng: random.Random) -> dict[str, str]:
    profile = {
        "saved_home": f"Home · {_address(rng)}",
        "saved_work": f"Work · {_address(rng)}",
        "saved_gym": f"Gym · {_address(rng)}",
        "saved_parents": f"Parents · {_address(rng)}",
        "driver": f"{_person(rng)} · Toyota Camry · "
                  f"{rng.randint(2, 9)}{''.join(rng.choices('ABCDEFGHJKLMNPRSTUVWXYZ', k=3))}"
                  f"{rng.randint(100, 999)}",
    }
    for i in range(1, 10):
        profile[f"recent{i}"] = f"{rng.randint(12, 9890)} {rng.choice(_STREETS)}"
    return profile


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

_TV = "android.widget.TextView"
_BTN = "android.widget.Button"
_IMG = "android.widget.ImageView"
_LAYOUT = "android.widget.LinearLayout"
_LIST = "android.widget.ListView"
_EDIT = "android.widget.EditText"


def _text(eid, value, top, height=90, cls=_TV, **kw):
    return UiElement(element_id=eid, class_name=cls, text=value,
                     bounds=(0, top, 1080, top + height), **kw)


def _button(eid, label, top, **kw):
    return _text(eid, label, top, cls=_BTN, clickable=True, **kw)


def banking_app(profile: Mapping[str, str]) -> SimulatedApp:
    package = "com.oakbank.mobile"
    txn_rows = []
    for i in range(1, 13):
        top = 1050 + (i - 1) * 100
        txn_rows.append(UiElement(
            element_id=f"txn{i}", class_name=_LAYOUT,
            bounds=(0, top, 1080, top + 90),
            children=(
                _text(f"txn{i}_name", profile[f"txn{i}"], top, height=80),
                UiElement(element_id=f"txn{i}_amt", class_name=_TV,
                          text=profile[f"txn{i}_amt"],
                          bounds=(800, top, 1080, top + 80)),
            )))
    home = UiElement(
        element_id="home_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("bank_title", "Oak Bank", 0, height=110),
            UiElement(element_id="avatar", class_name=_IMG,
                      content_description=profile["avatar_desc"],
                      bounds=(900, 0, 1060, 110), clickable=True),
            _text("greet", "Welcome back", 130),
            _text("owner", profile["owner_name"], 220),
            _text("balance_caption", "Available balance", 330),
            _text("balance", profile["balance"], 420),
            _button("pay", "Pay", 540),
            _button("nav_accounts", "Accounts", 660),
            _button("nav_cards", "Cards", 760),
            _button("nav_offers", "Offers", 860),
            _text("txn_header", "Recent activity", 960),
            UiElement(element_id="txn_list", class_name=_LIST,
                      bounds=(0, 1050, 1080, 1660), scrollable=True,
                      children=tuple(txn_rows)),
            _text("fdic", "Member FDIC", 1680, height=60),
            _text("version", "v8.14.2", 1750, height=60),
        ))
    choose = UiElement(
        element_id="choose_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("choose_header", "Choose Bank account", 120),
            UiElement(element_id="account_list", class_name=_LIST,
                      bounds=(0, 260, 1080, 560),
                      children=(
                          _text("row_checking", profile["checking"], 260,
                                height=140, clickable=True),
                          _text("row_saving", profile["saving"], 410,
                                height=140, clickable=True),
                      )),
            _text("choose_hint", "Transfers usually arrive in minutes", 600),
            _button("open_account", "Open a new account", 720),
            _text("fdic_note", "Deposits insured up to $250,000", 840),
            _button("cancel", "Cancel", 1700),
        ))
    confirm = UiElement(
        element_id="confirm_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("sent_title", "Payment sent", 200),
            _text("sent_detail", profile["checking"], 320),
            _text("sent_note", "A receipt was emailed to you", 440),
            _button("done", "Done", 600),
        ))
    return SimulatedApp(
        package=package,
        screens={
            "home": ScreenSnapshot(AppContext(package, ".HomeActivity"), home),
            "choose": ScreenSnapshot(AppContext(package, ".ChooseAccountActivity"),
                                     choose),
            "confirm": ScreenSnapshot(AppContext(package, ".ConfirmActivity"),
                                      confirm),
        },
        transitions={
            ("home", "pay", OpKind.CLICK): "choose",
            ("choose", "row_checking", OpKind.CLICK): "confirm",
            ("choose", "row_saving", OpKind.CLICK): "confirm",
            ("choose", "cancel", OpKind.CLICK): "home",
            ("confirm", "done", OpKind.CLICK): "home",
        },
        initial="home")


def banking_demo(app: SimulatedApp) -> list[DemoEvent]:
    return [
        DemoEvent(kind=OpKind.LAUNCH, app=app.launch_context()),
        DemoEvent(kind=OpKind.CLICK, screen=app.screens["home"],
                  target_id="pay"),
        DemoEvent(kind=OpKind.CLICK, screen=app.screens["choose"],
                  target_id="row_checking", menu_choice=True,
                  parameter_name="account"),
    ]


_DRINKS = [("Latte", "$4.25"), ("Cold Brew", "$3.95"), ("Flat White", "$4.65"),
           ("Mocha", "$4.95"), ("Chai", "$4.10"), ("Drip Coffee", "$2.85"),
           ("Matcha", "$5.15"), ("Cortado", "$4.40"), ("Americano", "$3.45"),
           ("Nitro Brew", "$5.45")]


def coffee_app(profile: Mapping[str, str]) -> SimulatedApp:
    package = "com.beanhouse.app"
    drink_rows = []
    for i, (drink, price) in enumerate(_DRINKS):
        top = 760 + i * 100
        drink_rows.append(UiElement(
            element_id=f"drink{i}", class_name=_LAYOUT,
            bounds=(0, top, 1080, top + 90),
            children=(
                _text(f"drink{i}_name", drink, top, height=80),
                UiElement(element_id=f"drink{i}_price", class_name=_TV,
                          text=price, bounds=(860, top, 1080, top + 80)),
            )))
    menu_children = [
        _text("shop_title", "Bean House", 0, height=110),
        _text("tagline", "Order ahead, skip the line", 120, height=70),
        _text("greeting", profile["greeting"], 200, height=70),
        _text("points", profile["points"], 280, height=70),
        _text("pickup", profile["pickup"], 360, height=70),
    ]
    if profile.get("promo"):
        menu_children.append(_text("promo", profile["promo"], 440, height=70))
    menu_children.extend([
        _text("sizes_caption", "Pick a size", 530, height=70),
        UiElement(element_id="size_list", class_name=_LIST,
                  bounds=(0, 610, 1080, 740),
                  children=(
                      UiElement(element_id="size_tall", class_name=_TV,
                                text="Tall", bounds=(0, 610, 360, 740),
                                clickable=True),
                      UiElement(element_id="size_grande", class_name=_TV,
                                text="Grande", bounds=(370, 610, 720, 740),
                                clickable=True),
                      UiElement(element_id="size_venti", class_name=_TV,
                                text="Venti", bounds=(730, 610, 1080, 740),
                                clickable=True),
                  )),
        UiElement(element_id="drink_list", class_name=_LIST,
                  bounds=(0, 760, 1080, 1560), scrollable=True,
                  children=tuple(drink_rows)),
        _text("stars_banner", "Double stars every Tuesday", 1570, height=60),
        _text("tax_note", "Prices include tax", 1640, height=50),
        _button("nav_menu", "Menu", 1700, height=60),
        _button("nav_rewards", "Rewards", 1770, height=60),
        _button("nav_account", "Account", 1840, height=60),
    ])
    menu = UiElement(element_id="menu_root", class_name=_LAYOUT,
                     bounds=(0, 0, 1080, 1920), children=tuple(menu_children))
    cart = UiElement(
        element_id="cart_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("cart_title", "Your order", 0, height=110),
            _text("cart_item", "Latte", 140),
            _text("cart_price", "$4.25", 240),
            _text("cart_stars", "You'll earn 12 stars", 340),
            _text("cart_member", profile["greeting"], 440),
            _text("cart_points", profile["points"], 540),
            _button("edit_order", "Edit order", 660),
            _button("gift_card", "Apply a gift card", 780),
            _button("pay_now", "Pay now", 900),
        ))
    done = UiElement(
        element_id="done_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("thanks", "Thank you!", 200),
            _text("ready_note", "Your drink will be ready soon", 320),
        ))
    return SimulatedApp(
        package=package,
        screens={
            "menu": ScreenSnapshot(AppContext(package, ".MenuActivity"), menu),
            "cart": ScreenSnapshot(AppContext(package, ".CartActivity"), cart),
            "done": ScreenSnapshot(AppContext(package, ".DoneActivity"), done),
        },
        transitions={
            ("menu", "size_tall", OpKind.CLICK): "cart",
            ("menu", "size_grande", OpKind.CLICK): "cart",
            ("menu", "size_venti", OpKind.CLICK): "cart",
            ("cart", "pay_now", OpKind.CLICK): "done",
        },
        initial="menu")


def coffee_demo(app: SimulatedApp) -> list[DemoEvent]:
    return [
        DemoEvent(kind=OpKind.LAUNCH, app=app.launch_context()),
        DemoEvent(kind=OpKind.CLICK, screen=app.screens["menu"],
                  target_id="size_venti", menu_choice=True,
                  parameter_name="size"),
        DemoEvent(kind=OpKind.CLICK, screen=app.screens["cart"],
                  target_id="pay_now"),
    ]


def ride_app(profile: Mapping[str, str], surge: bool = False) -> SimulatedApp:
    package = "com.swiftride.go"
    recent_rows = tuple(
        _text(f"recent{i}", profile[f"recent{i}"], 700 + (i - 1) * 90,
              height=80, clickable=True)
        for i in range(1, 10))
    request = UiElement(
        element_id="request_root", class_name=_LAYOUT,
        bounds=(0, 0, 1080, 1920),
        children=(
            _text("where_to", "Where to?", 0, height=110),
            UiElement(element_id="search", class_name=_EDIT,
                      content_description="Search destinations",
                      bounds=(0, 120, 1080, 220), focused=True),
            _text("saved_caption", "Saved places", 240, height=70),
            UiElement(element_id="saved_list", class_name=_LIST,
                      bounds=(0, 320, 1080, 620),
                      children=(
                          _text("row_home", profile["saved_home"], 320,
                                height=70, clickable=True),
                          _text("row_work", profile["saved_work"], 395,
                                height=70, clickable=True),
                          _text("row_gym", profile["saved_gym"], 470,
                                height=70, clickable=True),
                          _text("row_parents", profile["saved_parents"], 545,
                                height=70, clickable=True),
                      )),
            _text("recent_caption", "Recent", 640, height=50),
            UiElement(element_id="recent_list", class_name=_LIST,
                      bounds=(0, 700, 1080, 1240), scrollable=True,
                      children=recent_rows),
            _text("nearby_caption", "Popular nearby", 1260, height=60),
            *(_text(f"venue{i}", venue, 1330 + i * 60, height=50,
                    clickable=True)
              for i, venue in enumerate(_VENUES)),
            _text("pass_promo", "Get 10% off rides with SwiftPass", 1700,
                  height=50),
            _button("tab_rides", "Rides", 1760, height=50),
            _button("tab_eats", "Eats", 1815, height=50),
            _button("tab_account", "Account", 1870, height=50),
        ))
    riding = UiElement(
        element_id="riding_root", class_name=_LAYOUT, bounds=(0, 0, 1080, 1920),
        children=(
            _text("status", "Driver on the way", 0, height=110),
            _text("eta", "Arriving in 3 min", 130),
            _text("driver_row", profile["driver"], 240),
            _button("contact", "Contact driver", 380),
            _button("share_trip", "Share trip status", 500),
            _button("add_stop", "Add a stop", 620),
            _button("cancel_ride", "Cancel ride", 740),
            _text("safety", "Safety tools", 880),
            _text("tip_note", "Tips go entirely to your driver", 980),
            _text("quiet_note", "Quiet ride available on request", 1080),
            _text("fare_locked", "Fare locked at pickup", 1180),
            _text("rating_prompt", "Rate your last trip", 1280),
            _text("support_note", "Support available 24/7", 1380),
        ))
    surge_screen = UiElement(
        element_id="surge_root", class_name="android.widget.FrameLayout",
        bounds=(0, 0, 1080, 1920),
        children=(
            UiElement(element_id="surge_banner",
                      class_name="android.widget.ImageView",
                      content_description="Lightning bolt illustration",
                      bounds=(300, 200, 780, 680)),
            _text("surge_title", "Fares are higher due to demand", 720,
                  height=140),
            _text("surge_mult", "Current multiplier: 2.1x", 880),
            _button("accept_surge", "Accept higher fare", 1100),
            _button("decline_surge", "No thanks", 1260),
        ))
    transitions = {
        ("request", "row_home", OpKind.CLICK): "surge" if surge else "riding",
        ("request", "row_work", OpKind.CLICK): "surge" if surge else "riding",
        ("request", "row_gym", OpKind.CLICK): "surge" if surge else "riding",
        ("surge", "accept_surge", OpKind.CLICK): "riding",
        ("surge", "decline_surge", OpKind.CLICK): "request",
        ("riding", "cancel_ride", OpKind.CLICK): "request",
    }
    return SimulatedApp(
        package=package,
        screens={
            "request": ScreenSnapshot(AppContext(package, ".RequestActivity"),
                                      request),
            "riding": ScreenSnapshot(AppContext(package, ".RideActivity"),
                                     riding),
            "surge": ScreenSnapshot(AppContext(package, ".SurgeActivity"),
                                    surge_screen),
        },
        transitions=transitions,
        initial="request")


def ride_demo(app: SimulatedApp) -> list[DemoEvent]:
    return [
        DemoEvent(kind=OpKind.LAUNCH, app=app.launch_context()),
        DemoEvent(kind=OpKind.CLICK, screen=app.screens["request"],
                  target_id="row_home"),
        DemoEvent(kind=OpKind.READ_OUT, screen=app.screens["riding"],
                  target_id="status"),
    ]


# ---------------------------------------------------------------------------
# Blueprints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AppBlueprint:
    """Everything the harness needs to stamp out one app for one user."""

    name: str
    task: str
    sample: Callable[[random.Random], dict[str, str]]
    build: Callable[[Mapping[str, str]], SimulatedApp]
    demo: Callable[[SimulatedApp], list[DemoEvent]]
    personal_fields: tuple[str, ...]
    dynamic_fields: tuple[str, ...] = ()


BLUEPRINTS: dict[str, AppBlueprint] = {
    "banking": AppBlueprint(
        name="banking",
        task="pay from the checking account",
        sample=sample_banking_profile,
        build=banking_app,
        demo=banking_demo,
        personal_fields=("owner_name", "avatar_desc", "checking", "saving",
                         "balance")
        + tuple(f"txn{i}" for i in range(1, 13))
        + tuple(f"txn{i}_amt" for i in range(1, 13))),
    "coffee": AppBlueprint(
        name="coffee",
        task="order a venti drink",
        sample=sample_coffee_profile,
        build=coffee_app,
        demo=coffee_demo,
        personal_fields=("greeting", "points", "pickup"),
        dynamic_fields=("promo",)),
    "ride": AppBlueprint(
        name="ride",
        task="ride home",
        sample=sample_ride_profile,
        build=ride_app,
        demo=ride_demo,
        personal_fields=("saved_home", "saved_work", "saved_gym",
                         "saved_parents", "driver")
        + tuple(f"recent{i}" for i in range(1, 10))),
}

import pytest

from hendorse.config import load_home
from hendorse.constants import TESTBED_HOME
from hendorse.errors import (
    ConfigurationError,
    DuplicateIdError,
    UnknownAhoError,
    UnknownAttributeError,
    UnknownDeviceTypeError,
    UnknownIdError,
    UnknownVerbError,
)
from hendorse.events import DeviceAdded, DeviceOffline, DeviceOnline, DeviceRemoved, EndorsementChanged
from hendorse.home import (
    Aho,
    ApiToken,
    AttributeValue,
    DeviceAttribute,
    DeviceAttributeMap,
    DeviceInstance,
    Home,
    ObjectRef,
    Principal,
    PrincipalKind,
    TrustClass,
)


class TestAttributeValue:
    @pytest.mark.parametrize(
        ("text", "label", "qualifier"),
        [("LOCKED", "LOCKED", None), ("UNLOCKED(owner)", "UNLOCKED", "owner"), ("  ACTIVE ", "ACTIVE", None)],
    )
    def test_parse(self, text, label, qualifier):
        value = AttributeValue.parse(text)
        assert value.label == label
        assert value.qualifier == qualifier
        assert str(value) == text.strip()

    @pytest.mark.parametrize("text", ["", "UNLOCKED(", "UNLOCKED()", "TWO WORDS", "(owner)"])
    def test_parse_rejects_malformed(self, text):
        with pytest.raises(ValueError, match="Invalid attribute value"):
            AttributeValue.parse(text)

    def test_equality_is_on_both_fields(self):
        assert AttributeValue("UNLOCKED", "owner") == AttributeValue.parse("UNLOCKED(owner)")
        assert AttributeValue("UNLOCKED", "owner") != AttributeValue("UNLOCKED", "manual")
        assert AttributeValue("UNLOCKED") != AttributeValue("UNLOCKED", "owner")

    def test_matches_ignores_qualifier_only_when_unqualified(self):
        unqualified = AttributeValue("UNLOCKED")
        assert unqualified.matches(AttributeValue("UNLOCKED", "owner"))
        assert unqualified.matches(AttributeValue("UNLOCKED"))
        assert not AttributeValue("UNLOCKED", "owner").matches(AttributeValue("UNLOCKED", "manual"))
        assert not AttributeValue("UNLOCKED", "owner").matches(AttributeValue("UNLOCKED"))
        assert not unqualified.matches(AttributeValue("LOCKED"))


class TestDeviceAttributeMap:
    def test_rejects_duplicate_pairs(self):
        entry = _attribute("door-sensor", "contact", TrustClass.READ_ONLY)
        device_map = DeviceAttributeMap([entry])
        with pytest.raises(ConfigurationError, match="Duplicate"):
            device_map.add(entry)
        device_map.put(_attribute("door-sensor", "contact", TrustClass.UNTRUSTED))  # put replaces
        assert device_map.attribute("door-sensor", "contact").trust_class is TrustClass.UNTRUSTED

    def test_unknown_lookups(self):
        device_map = DeviceAttributeMap([_attribute("door-sensor", "contact", TrustClass.READ_ONLY)])
        with pytest.raises(UnknownDeviceTypeError):
            device_map.attribute("fridge", "contact")
        with pytest.raises(UnknownAttributeError):
            device_map.attribute("door-sensor", "battery")
        assert device_map.get("fridge", "contact") is None

    def test_endorsement_attributes(self):
        device_map = DeviceAttributeMap(
            [
                _attribute("door-sensor", "contact", TrustClass.READ_ONLY),
                _attribute("door-lock", "lock", TrustClass.DESIGNATED),
                _attribute("camera", "power", TrustClass.UNTRUSTED),
            ]
        )
        assert {entry.pair for entry in device_map.endorsement_attributes()} == {"door-sensor.contact", "door-lock.lock"}
        assert [entry.pair for entry in device_map] == ["camera.power", "door-lock.lock", "door-sensor.contact"]

    def test_attribute_validates_domain_and_neutral(self):
        with pytest.raises(ConfigurationError, match="Empty value domain"):
            DeviceAttribute("door-sensor", "contact", TrustClass.READ_ONLY, frozenset())
        with pytest.raises(ConfigurationError, match="not in its value domain"):
            DeviceAttribute(
                "door-sensor",
                "contact",
                TrustClass.READ_ONLY,
                frozenset({AttributeValue("ACTIVE")}),
                neutral=AttributeValue("INACTIVE"),
            )


class TestCatalog:
    def test_bundled_catalog(self, _catalog):
        assert len(_catalog) == 28
        designated = {entry.pair for entry in _catalog if entry.trust_class is TrustClass.DESIGNATED}
        assert designated == {
            "door-lock.lock",
            "garage-door-lock.lock",
            "garage-door-opener.door",
            "security-panel.alarm",
            "water-valve.valve",
        }

    def test_interactions(self, _catalog):
        unlock = _catalog.interaction("door-lock", "unlock")
        assert unlock.params == {"method": "owner"}
        assert unlock.records[0].value == "UNLOCKED({method})"
        assert "walk-past" in _catalog.verbs_of("motion-sensor")
        with pytest.raises(UnknownVerbError):
            _catalog.interaction("door-lock", "kick")


class TestHomeRegistry:
    def test_register_publishes_one_event(self, _catalog):
        home = Home(_catalog, locations=["hallway"])
        received = []
        home.bus.subscribe(DeviceAdded, received.append)

        event = home.register_device(DeviceInstance("motion-1", "motion-sensor", "hallway"))
        assert received == [event]
        assert list(home.events) == [event]
        assert home.devices_at("hallway") == (DeviceInstance("motion-1", "motion-sensor", "hallway"),)

    def test_register_unknown_location_adds_it(self, _catalog):
        home = Home(_catalog)
        home.register_device(DeviceInstance("lock-1", "door-lock", "garage"))
        assert home.locations == ("garage",)

    def test_register_failures_publish_nothing(self, _catalog):
        home = Home(_catalog)
        home.register_device(DeviceInstance("lock-1", "door-lock", "front-door"))
        with pytest.raises(DuplicateIdError):
            home.register_device(DeviceInstance("lock-1", "motion-sensor", "hallway"))
        with pytest.raises(UnknownDeviceTypeError):
            home.register_device(DeviceInstance("fridge-1", "fridge", "kitchen"))
        assert len(home.events) == 1

    def test_remove_and_availability(self, _catalog):
        home = Home(_catalog)
        home.register_device(DeviceInstance("motion-1", "motion-sensor", "hallway"))

        assert isinstance(home.set_online("motion-1", False), DeviceOffline)
        assert home.set_online("motion-1", False) is None  # unchanged
        assert not home.device("motion-1").online
        assert isinstance(home.set_online("motion-1", True), DeviceOnline)
        assert isinstance(home.remove_device("motion-1"), DeviceRemoved)
        assert [type(event) for event in home.events] == [DeviceAdded, DeviceOffline, DeviceOnline, DeviceRemoved]

        with pytest.raises(UnknownIdError):
            home.remove_device("motion-1")
        with pytest.raises(UnknownIdError):
            home.attribute_of("motion-1", "motion")

    def test_ahos(self, _catalog):
        home = Home(_catalog)
        home.define_aho(Aho("home", ("away", "home"), endorsed=True))
        assert home.aho_value("home") == "away"  # first value by default
        assert home.write_aho("home", "home") == "away"
        assert home.aho_values == {"home": "home"}

        assert isinstance(home.set_endorsed("home", False), EndorsementChanged)
        assert not home.aho("home").endorsed
        with pytest.raises(ConfigurationError, match="already defined"):
            home.define_aho(Aho("home", ("away", "home")))
        with pytest.raises(UnknownAhoError):
            home.aho("mode")

    def test_aho_initial_value_must_be_in_domain(self):
        with pytest.raises(ConfigurationError, match="Initial value"):
            Aho("mode", ("day", "night"), initial="vacation")
        with pytest.raises(ConfigurationError, match="non-empty"):
            Aho("mode", ())

    def test_tokens_and_principals(self, _catalog):
        home = Home(_catalog)
        home.add_token(ApiToken("tracker", "home/away tracker"))
        home.add_token(ApiToken("dashboard", "local dashboard", local=True))
        with pytest.raises(ConfigurationError):
            home.add_token(ApiToken("tracker", "another tracker"))

        assert home.principal_for("tracker") == Principal.third_party("tracker")
        assert home.principal_for("dashboard").kind is PrincipalKind.LOCAL_USER
        assert home.principal_for("stolen") is None

    def test_load_testbed(self, _catalog):
        home = load_home(TESTBED_HOME, _catalog)
        assert len(home.devices) == 11
        assert home.adjacent("front-door") == ("hallway",)
        assert home.adjacent("hallway") == ()
        assert {aho.name for aho in home.ahos if aho.endorsed} == {"home", "security_state"}
        assert home.token("ifttt").grants_attribute("switch-1", "power")  # wildcard grant
        assert not home.token("ifttt").grants_attribute("camera-1", "power")


class TestPrincipalsAndRefs:
    def test_principal_strings(self):
        assert str(Principal.third_party("kasa")) == "third-party(kasa)"
        assert str(Principal.device_report("lock-1")) == "device(lock-1)"
        assert str(Principal.platform_app()) == "platform-app"
        assert str(Principal.local_user()) == "local-user"

    def test_principal_needs_its_identity(self):
        with pytest.raises(ValueError, match="token"):
            Principal(PrincipalKind.THIRD_PARTY)
        with pytest.raises(ValueError, match="device id"):
            Principal(PrincipalKind.DEVICE_REPORT)

    def test_object_ref_parse(self):
        assert ObjectRef.parse("home") == ObjectRef(aho="home")
        assert ObjectRef.parse("camera-1.power") == ObjectRef(device_id="camera-1", attribute="power")
        assert str(ObjectRef.parse("camera-1.power")) == "camera-1.power"
        with pytest.raises(ValueError, match="either"):
            ObjectRef(aho="home", device_id="camera-1", attribute="power")


# ----- Helpers ----- #


def _attribute(device_type: str, attribute: str, trust_class: TrustClass) -> DeviceAttribute:
    return DeviceAttribute(device_type, attribute, trust_class, frozenset({AttributeValue("ACTIVE"), AttributeValue("INACTIVE")}))

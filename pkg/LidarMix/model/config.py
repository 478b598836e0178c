from ..projection.grid import GridSpec, REDUCTIONS
from ..util.errors import ConfigurationError

import logging

import attr


# Planar views and the axis pair each projects onto
PLANAR_VIEWS = {
    'xy': (0, 1),
    'xz': (0, 2),
    'yz': (1, 2)
}
RANGE_VIEW = 'range'
VIEWS = tuple(PLANAR_VIEWS) + (RANGE_VIEW,)

ACTIVATIONS = ('relu', 'gelu')


def _atLeastOne(instance, attribute, value):
    if value < 1:
        raise ConfigurationError('{0} must be >= 1, got {1}'
                                 .format(attribute.name, value))


def _probability(instance, attribute, value):
    if not 0.0 <= value < 1.0:
        raise ConfigurationError('{0} must be in [0, 1), got {1}'
                                 .format(attribute.name, value))


def _floats(value) -> tuple:
    if isinstance(value, str):
        value = value.split(',')
    return tuple(float(v) for v in value)


def _views(value) -> tuple:
    if isinstance(value, str):
        value = value.split(',')
    return tuple(str(v).strip() for v in value)


def _flag(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ('true', '1', 'yes')
    return bool(value)


@attr.s(frozen=True)
class ModelConfig:
    """Hyper-parameters of the segmentation network: channel width
    `features` (F), backbone depth `layers` (L), neighbor count `neighbors`
    (K), class count `classes` (C), the order in which backbone layers cycle
    through the views, and the grids of the four views (planar grids cover
    the crop box at `grid_resolution` meters).
    """

    name = attr.ib(default='custom', converter=str)
    features = attr.ib(default=256, converter=int, validator=_atLeastOne)
    layers = attr.ib(default=48, converter=int, validator=_atLeastOne)
    neighbors = attr.ib(default=16, converter=int, validator=_atLeastOne)
    classes = attr.ib(default=19, converter=int, validator=_atLeastOne)
    cycle = attr.ib(default=VIEWS, converter=_views)
    grid_resolution = attr.ib(default=0.4, converter=float)
    crop_min = attr.ib(default=(-50.0, -50.0, -5.0), converter=_floats)
    crop_max = attr.ib(default=(50.0, 50.0, 5.0), converter=_floats)
    range_height = attr.ib(default=64, converter=int, validator=_atLeastOne)
    range_width = attr.ib(default=2048, converter=int, validator=_atLeastOne)
    fov_up = attr.ib(default=3.0, converter=float)
    fov_down = attr.ib(default=-25.0, converter=float)
    range_reduction = attr.ib(default='mean',
                              validator=attr.validators.in_(REDUCTIONS))
    kernel_size = attr.ib(default=3, converter=int, validator=_atLeastOne)
    groups = attr.ib(default=1, converter=int, validator=_atLeastOne)
    neighbor_hidden = attr.ib(default=64, converter=int,
                              validator=_atLeastOne)
    activation = attr.ib(default='relu',
                         validator=attr.validators.in_(ACTIVATIONS))
    neighbor_dropout_p = attr.ib(default=0.0, converter=float,
                                 validator=_probability)
    head_skip = attr.ib(default=True, converter=_flag)
    relative_neighbors = attr.ib(default=False, converter=_flag)
    exclude_self = attr.ib(default=False, converter=_flag)
    ignore_class = attr.ib(default=255, converter=int)

    def __attrs_post_init__(self):
        if self.features % self.groups:
            raise ConfigurationError('features={0} is not divisible by '
                                     'groups={1}'.format(self.features,
                                                         self.groups))
        if self.kernel_size % 2 == 0:
            raise ConfigurationError('kernel_size must be odd, got {0}'
                                     .format(self.kernel_size))
        if not self.cycle or not set(self.cycle) <= set(VIEWS):
            raise ConfigurationError('cycle {0} must be a non-empty sequence '
                                     'of {1}'.format(self.cycle, VIEWS))
        if 0 <= self.ignore_class < self.classes:
            raise ConfigurationError('ignore_class {0} collides with a '
                                     'class id'.format(self.ignore_class))
        # Builds and validates the grids
        self.gridSpecs()

    def gridSpecs(self) -> dict:
        """Returns the GridSpec of every view, keyed by view name.
        """

        specs = {}
        for view, (a, b) in PLANAR_VIEWS.items():
            specs[view] = GridSpec.planar(
                view, (a, b), self.grid_resolution,
                (self.crop_min[a], self.crop_min[b]),
                (self.crop_max[a], self.crop_max[b]))
        specs[RANGE_VIEW] = GridSpec.spherical(
            RANGE_VIEW, self.range_height, self.range_width, self.fov_up,
            self.fov_down, self.range_reduction)
        return specs

    def layerView(self, layer: int) -> str:
        return self.cycle[layer % len(self.cycle)]

    def evolve(self, **changes) -> 'ModelConfig':
        return attr.evolve(self, **changes)

    def differences(self, other: 'ModelConfig') -> list:
        """Names of the fields whose values differ from `other`.
        """

        return [field.name for field in attr.fields(ModelConfig)
                if getattr(self, field.name) != getattr(other, field.name)]

    def toText(self) -> str:
        """Serializes the configuration as `key=value` lines.
        """

        lines = []
        for key, value in attr.asdict(self).items():
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            elif isinstance(value, (tuple, list)):
                value = ','.join(str(v) for v in value)
            lines.append('{0}={1}'.format(key, value))
        return '\n'.join(lines) + '\n'

    @classmethod
    def fromText(cls, text: str) -> 'ModelConfig':
        """Parses `key=value` lines (blank lines and `#` comments skipped).

        Raises:
            ConfigurationError -- Raised for malformed lines or unknown keys.
        """

        known = {field.name for field in attr.fields(cls)}
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigurationError('Line {0}: expected key=value, got '
                                         '"{1}"'.format(number, line))
            key, value = (part.strip() for part in line.split('=', 1))
            if key not in known:
                raise ConfigurationError('Line {0}: unknown model config '
                                         'key "{1}"'.format(number, key))
            values[key] = value
        return cls(**values)

    @classmethod
    def fromFile(cls, path: str) -> 'ModelConfig':
        with open(path, 'r') as config_file:
            return cls.fromText(config_file.read())

    @classmethod
    def preset(cls, name: str, **overrides) -> 'ModelConfig':
        """Builds a named preset, optionally overriding fields.

        Raises:
            ConfigurationError -- Raised for an unknown preset.
        """

        if name not in PRESETS:
            logging.error('Unknown model preset {0}'.format(name))
            raise ConfigurationError('Unknown model preset {0}, expected one '
                                     'of {1}'.format(name, sorted(PRESETS)))
        values = dict(PRESETS[name], name=name)
        values.update(overrides)
        return cls(**values)

    @classmethod
    def fromParameters(cls, parameters: dict) -> 'ModelConfig':
        """Builds the configuration from the `model` section of the JSON
        configuration: a `preset` name plus field overrides.
        """

        parameters = dict(parameters)
        preset = parameters.pop('preset', 'semantic-kitti')
        return cls.preset(preset, **parameters)


PRESETS = {
    # 256 channels, 48 layers, 40 cm planar cells, 64-beam range image
    'semantic-kitti': {
        'features': 256, 'layers': 48, 'neighbors': 16, 'classes': 19,
        'grid_resolution': 0.4,
        'crop_min': (-50.0, -50.0, -5.0), 'crop_max': (50.0, 50.0, 5.0),
        'range_height': 64, 'range_width': 2048,
        'fov_up': 3.0, 'fov_down': -25.0
    },
    'semantic-kitti-l12': {
        'features': 256, 'layers': 12, 'neighbors': 16, 'classes': 19,
        'grid_resolution': 0.4,
        'crop_min': (-50.0, -50.0, -5.0), 'crop_max': (50.0, 50.0, 5.0),
        'range_height': 64, 'range_width': 2048,
        'fov_up': 3.0, 'fov_down': -25.0
    },
    # 384 channels, 60 cm planar cells, 32-beam range image
    'nuscenes': {
        'features': 384, 'layers': 48, 'neighbors': 16, 'classes': 16,
        'grid_resolution': 0.6,
        'crop_min': (-50.0, -50.0, -5.0), 'crop_max': (50.0, 50.0, 5.0),
        'range_height': 32, 'range_width': 1024,
        'fov_up': 10.0, 'fov_down': -30.0
    },
    'toy': {
        'features': 32, 'layers': 4, 'neighbors': 16, 'classes': 3,
        'grid_resolution': 0.5,
        'crop_min': (-10.0, -10.0, -2.0), 'crop_max': (10.0, 10.0, 4.0),
        'range_height': 16, 'range_width': 128,
        'fov_up': 45.0, 'fov_down': -45.0
    }
}

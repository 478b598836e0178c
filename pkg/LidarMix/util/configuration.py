import collections.abc
import json
import logging
import os


# Configuration files live in `config/` at the repository root
CONFIG_FOLDER = os.path.join(
    os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__)))), 'config')
BASE_CONFIGURATION = os.path.join(CONFIG_FOLDER, 'base.json')

# Environment variable -> (section, key)
ENVIRONMENT_OVERRIDES = {
    'LIDARMIX_DATA_DIR': ('runtime', 'data_dir'),
    'LIDARMIX_THREADS': ('runtime', 'threads')
}


def setup(override: str=''):
    """Initializes the static configuration variables used in the
    LidarMix system. Provides a method to override base configuration,
    followed by environment variable overrides.

    Keyword Arguments:
        override {str} -- File name in the `config/` directory (or a path to
            a JSON file) that may be used to override the `base.json`
            configuration (default: {''}).

    Raises:
        RuntimeError -- Raised when configuration files cannot be found.
    """

    try:
        with open(BASE_CONFIGURATION) as base_file:
            base_config = json.load(base_file)
    except FileNotFoundError:
        logging.error('Base configuration file {0} not found.'
                      .format(BASE_CONFIGURATION))
        raise RuntimeError('Base configuration file not found.')

    # Check if override is required
    if override != '':
        override_path = override if os.path.isfile(override) else \
            os.path.join(CONFIG_FOLDER, override)
        try:
            with open(override_path) as override_file:
                override_config = json.load(override_file)
        except FileNotFoundError:
            logging.error('Override configuration file {0} not found.'
                          .format(override_path))
            raise RuntimeError('Invalid configuration override file.')

        # Update base config with override parameters
        base_config = update(base_config, override_config)

    base_config = applyEnvironment(base_config)

    # Add to parameters
    global Parameters
    Parameters.__dict__.update(base_config)


def update(d, u):
    """Function to update a dictionary with values from another.

    Arguments:
        d {dict} -- Base dictionary.
        u {dict} -- Update dictionary.

    Returns:
        dict -- Updated dictionary.
    """

    for k, v in u.items():
        if isinstance(v, collections.abc.Mapping):
            d[k] = update(d.get(k, {}), v)
        else:
            d[k] = v
    return d


def applyEnvironment(d: dict) -> dict:
    """Function to apply the `LIDARMIX_*` environment variable overrides to a
    configuration dictionary.

    Arguments:
        d {dict} -- Configuration dictionary.

    Returns:
        dict -- Updated configuration dictionary.
    """

    for variable, (section, key) in ENVIRONMENT_OVERRIDES.items():
        value = os.environ.get(variable)
        if value is None or value == '':
            continue
        if key == 'threads':
            value = int(value)
        logging.info('Environment override {0} -> {1}.{2}'
                     .format(variable, section, key))
        d.setdefault(section, {})[key] = value
    return d


@staticmethod
def Parameters():
    """Static function to store configuration variables. This function
    is not designed to be called, but rather serves as a placeholder.

    Raises:
        NotImplementedError -- Raised when the function is called directly.
    """

    raise NotImplementedError()


def resolvePath(path: str) -> str:
    """Function to resolve a configured path. Relative paths that do not exist
    from the working directory are taken relative to the repository root.

    Arguments:
        path {str} -- Configured path.

    Returns:
        str -- Resolved path.
    """

    if os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.join(os.path.dirname(CONFIG_FOLDER), path)

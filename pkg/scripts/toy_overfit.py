from context import LidarMix
import logging
import sys

########################
# LOGGING
########################

# Setting up formatter
formatter = logging.Formatter('%(asctime)s - %(name)s - \
    %(levelname)s - %(message)s')

# Setting up base logger
root = logging.getLogger()
root.setLevel(logging.INFO)

# Adding stdout and log file
log_file = logging.FileHandler('toy_overfit.log')
log_stdout = logging.StreamHandler(sys.stdout)

# Setting formatter
log_file.setFormatter(formatter)
log_stdout.setFormatter(formatter)

# Adding handlers
root.addHandler(log_stdout)
root.addHandler(log_file)


########################
# LidarMix
########################

# Setting up configuration
LidarMix.util.configSetup()

config = LidarMix.util.config
toy = config.toy

model_config = LidarMix.model.ModelConfig.fromParameters(toy['model'])
train_config = LidarMix.train.TrainConfig.fromParameters(toy)
dataset = LidarMix.train.makeToyDataset(train_config.seed,
                                        scenes=toy['scenes'],
                                        n_points=toy['points'])

# Full view cycle, then the same run without the range image
cycles = {
    'all_views': model_config.cycle,
    'no_range': tuple(view for view in model_config.cycle
                      if view != LidarMix.model.RANGE_VIEW)
}

for name, cycle in cycles.items():
    manager = LidarMix.train.Manager(model_config.evolve(cycle=cycle),
                                     dataset, train_config)
    params = manager.start()

    cm = LidarMix.train.ConfusionMatrix(model_config.classes,
                                        model_config.ignore_class)
    for prepared in manager.prepared:
        cm.add(prepared.labels, LidarMix.model.predict(prepared, params)[0])

    logging.info('{0}: loss {1:.4f} -> {2:.4f}, accuracy {3:.4f}'.format(
        name, manager.losses[0], manager.losses[-1], cm.pointAccuracy()))

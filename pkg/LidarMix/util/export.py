from .configuration import Parameters as config

from functools import wraps
import logging
import os
import sys

import pandas as pd


class _Decorators:
    @classmethod
    def checkFolder(cls, decorated):
        """Decorator to verify that the output folder exists, and to create
        it if it does not.
        """

        @wraps(decorated)
        def wrapper(self, *args, **kwargs):
            if not os.path.exists(self.output_folder):
                os.makedirs(self.output_folder)
            return decorated(self, *args, **kwargs)
        return wrapper


class Export:
    def __init__(self, report: pd.DataFrame, name: str,
                 output_folder: str=None):
        """Initialization logic for the Export module. Handles every tabular
        report (benchmarks, metrics, class counts, timing breakdowns).

        Arguments:
            report {pd.DataFrame} -- Report to be exported.
            name {str} -- Report name, used as the output file stem.

        Keyword Arguments:
            output_folder {str} -- Output folder, defaults to the configured
                `runtime.output_folder` (default: {None}).
        """

        self.report = report
        self.name = name
        if output_folder is None:
            output_folder = getattr(config, 'runtime', {}) \
                .get('output_folder', 'output/')
        self.output_folder = output_folder

    def toStdout(self, stream=None):
        """Function to print the report as a human readable table followed by
        its CSV form.

        Keyword Arguments:
            stream -- Output stream (default: {sys.stdout}).
        """

        stream = stream or sys.stdout
        stream.write('# {0}\n'.format(self.name))
        if self.report.empty:
            stream.write('(empty report)\n')
        else:
            stream.write(self.report.to_string(index=False) + '\n')
        stream.write(self.report.to_csv(index=False))
        stream.flush()

    @_Decorators.checkFolder
    def toCSV(self) -> str:
        """Function to write the report to a csv file.

        Returns:
            str -- Path of the written file.
        """

        output_file = os.path.join(self.output_folder, self.name + '.csv')

        logging.info('Writing {0} report to CSV file {1}'
                     .format(self.name, output_file))

        self.report.to_csv(output_file, index=False)
        return output_file

    @_Decorators.checkFolder
    def toExcel(self) -> str:
        """Function to write the report to a Microsoft Excel file.

        Returns:
            str -- Path of the written file.
        """

        output_file = os.path.join(self.output_folder, self.name + '.xlsx')

        logging.info('Writing {0} report to Excel file {1}'
                     .format(self.name, output_file))

        self.report.to_excel(output_file, index=False)
        return output_file

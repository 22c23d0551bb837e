import configparser
import pathlib
from typing import Any, Optional

import penaltylearn.const

from penaltylearn.log import dbg


class Settings:
    """Defaults layer of the configuration: the packaged ini template, overlaid
    by the user file `~/.penaltylearn.ini` when it exists"""

    def __init__(self, filename: Optional[pathlib.Path] = None):
        self.__config: Optional[configparser.ConfigParser] = None
        self.__config_filename = filename or penaltylearn.const.CONFIG_FILEPATH
        self.load()
        return

    def get(self, section: str, key: str, default=None) -> Any:
        """
        Retrieve a setting
        """
        assert self.__config
        return self.__config.get(section, key, fallback=default)

    def getint(self, section: str, key: str, default=0) -> int:
        """
        Retrieve an integer setting
        """
        assert self.__config
        return self.__config.getint(section, key, fallback=default)

    def getfloat(self, section: str, key: str, default=0.0) -> float:
        """
        Retrieve a float setting
        """
        assert self.__config
        return self.__config.getfloat(section, key, fallback=default)

    def getboolean(self, section: str, key: str, default=False) -> bool:
        """
        Retrieve a boolean setting
        """
        assert self.__config
        return self.__config.getboolean(section, key, fallback=default)

    def load(self) -> None:
        """
        Load the template, then the user file on top of it
        """
        if self.__config is not None:
            del self.__config

        self.__config = configparser.ConfigParser()
        self.__config.read(penaltylearn.const.TEMPLATE_CONFIG)
        if self.__config_filename.is_file():
            self.__config.read(self.__config_filename)
            dbg(f"Settings loaded from '{self.__config_filename}'")
        return


# G-SFT toolkit: exact computations with shifts of finite type carrying a free group action
__version__ = "0.1.0"

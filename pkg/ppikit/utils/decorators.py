"""Module with decorator to check types of property."""


def accepts(*classinfo_args):
    """Decorator to check types of property."""
    def isinstance_decorator_wrapper(old_fn):
        def new_fn(self, *args, **kwargs):
            for i, classinfo in enumerate(classinfo_args):
                arg = args[i]
                if isinstance(arg, bool) and bool not in _flatten(classinfo):
                    _raise(old_fn.__name__, classinfo, arg)
                if not isinstance(arg, classinfo):
                    _raise(old_fn.__name__, classinfo, arg)
            return old_fn(self, *args, **kwargs)
        new_fn.__name__ = old_fn.__name__
        new_fn.__doc__ = old_fn.__doc__
        return new_fn
    return isinstance_decorator_wrapper


def _flatten(classinfo):
    return classinfo if isinstance(classinfo, tuple) else (classinfo,)


def _raise(name, classinfo, arg):
    obj_type = "' or '".join([x.__name__ for x in _flatten(classinfo)])
    msg = f"Attribute {name} must be of type "\
          f"'{obj_type}' but '{type(arg).__name__}' was passed"
    raise TypeError(msg)

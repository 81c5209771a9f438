# gyrosym utilities
